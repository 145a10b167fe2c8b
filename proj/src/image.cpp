#include "offemma/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "offemma/errors.hpp"
#include "offemma/util.hpp"

namespace offemma {

namespace {

ImageU8 from_bgr_mat(const cv::Mat& mat, const std::string& what) {
  if (mat.empty()) {
    raise(ErrorCode::BadImage, "cannot decode " + what);
  }
  cv::Mat bgr;
  if (mat.channels() == 3) {
    bgr = mat;
  } else if (mat.channels() == 1) {
    cv::cvtColor(mat, bgr, cv::COLOR_GRAY2BGR);
  } else if (mat.channels() == 4) {
    cv::cvtColor(mat, bgr, cv::COLOR_BGRA2BGR);
  } else {
    raise(ErrorCode::BadImage, what + ": unsupported channel count");
  }
  ImageU8 out;
  out.width = bgr.cols;
  out.height = bgr.rows;
  out.rgb.resize(out.pixel_count() * 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const uint8_t* row = bgr.ptr<uint8_t>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      uint8_t* px = out.pixel(x, y);
      px[0] = row[3 * x + 2];
      px[1] = row[3 * x + 1];
      px[2] = row[3 * x + 0];
    }
  }
  return out;
}

cv::Mat to_bgr_mat(const ImageU8& image) {
  cv::Mat mat(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    uint8_t* row = mat.ptr<uint8_t>(y);
    for (int x = 0; x < image.width; ++x) {
      const uint8_t* px = image.pixel(x, y);
      row[3 * x + 0] = px[2];
      row[3 * x + 1] = px[1];
      row[3 * x + 2] = px[0];
    }
  }
  return mat;
}

}  // namespace

ImageU8 make_image(int width, int height, uint8_t r, uint8_t g, uint8_t b) {
  ImageU8 out;
  out.width = width;
  out.height = height;
  out.rgb.resize((size_t)width * height * 3);
  for (size_t i = 0; i < out.pixel_count(); ++i) {
    out.rgb[3 * i + 0] = r;
    out.rgb[3 * i + 1] = g;
    out.rgb[3 * i + 2] = b;
  }
  return out;
}

ImageU8 decode_image(const std::string& bytes) {
  cv::Mat raw(1, (int)bytes.size(), CV_8UC1, (void*)bytes.data());
  cv::Mat mat = cv::imdecode(raw, cv::IMREAD_COLOR);
  return from_bgr_mat(mat, "image bytes");
}

ImageU8 load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::MissingFile, path.string());
  }
  return decode_image(read_file(path));
}

std::string encode_png(const ImageU8& image) {
  if (image.width <= 0 || image.height <= 0) {
    raise(ErrorCode::BadImage, "cannot encode empty image");
  }
  std::vector<uint8_t> buf;
  if (!cv::imencode(".png", to_bgr_mat(image), buf)) {
    raise(ErrorCode::BadImage, "PNG encode failed");
  }
  return std::string(buf.begin(), buf.end());
}

void save_png(const std::filesystem::path& path, const ImageU8& image) {
  write_file(path, encode_png(image));
}

std::vector<uint8_t> decode_gray_png(const std::string& bytes, int& width,
                                     int& height) {
  cv::Mat raw(1, (int)bytes.size(), CV_8UC1, (void*)bytes.data());
  cv::Mat mat = cv::imdecode(raw, cv::IMREAD_UNCHANGED);
  if (mat.empty()) {
    raise(ErrorCode::BadImage, "cannot decode gray PNG");
  }
  if (mat.channels() != 1 || mat.depth() != CV_8U) {
    raise(ErrorCode::BadImage, "label map PNG must be single-channel 8-bit");
  }
  width = mat.cols;
  height = mat.rows;
  std::vector<uint8_t> values((size_t)mat.cols * mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    const uint8_t* row = mat.ptr<uint8_t>(y);
    std::copy(row, row + mat.cols, values.begin() + (size_t)y * mat.cols);
  }
  return values;
}

std::string encode_gray_png(const std::vector<uint8_t>& values, int width,
                            int height) {
  if ((size_t)width * height != values.size() || width <= 0 || height <= 0) {
    raise(ErrorCode::BadImage, "gray buffer size does not match dimensions");
  }
  cv::Mat mat(height, width, CV_8UC1);
  for (int y = 0; y < height; ++y) {
    std::copy(values.begin() + (size_t)y * width,
              values.begin() + (size_t)(y + 1) * width, mat.ptr<uint8_t>(y));
  }
  std::vector<uint8_t> buf;
  if (!cv::imencode(".png", mat, buf)) {
    raise(ErrorCode::BadImage, "PNG encode failed");
  }
  return std::string(buf.begin(), buf.end());
}

}  // namespace offemma
