#include "hazegan/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "hazegan/errors.hpp"

namespace hazegan {

FloatMap luminance(const Image& img) {
  FloatMap y(img.h, img.w);
  for (int i = 0; i < img.h; ++i) {
    for (int j = 0; j < img.w; ++j) {
      y.at(i, j) = 0.299f * img.at(i, j, 0) + 0.587f * img.at(i, j, 1) + 0.114f * img.at(i, j, 2);
    }
  }
  return y;
}

Image read_image(const std::string& path, std::vector<std::string>* diagnostics) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("cannot decode image: " + path);
  if (m.channels() != 3) {
    if (diagnostics) {
      diagnostics->push_back(path + ": " + std::to_string(m.channels()) +
                             "-channel input converted to RGB");
    }
    cv::Mat rgb;
    if (m.channels() == 1) {
      cv::cvtColor(m, rgb, cv::COLOR_GRAY2BGR);
    } else if (m.channels() == 4) {
      cv::cvtColor(m, rgb, cv::COLOR_BGRA2BGR);
    } else {
      throw DataError("unsupported channel count in " + path);
    }
    m = rgb;
  }
  if (m.depth() != CV_8U) {
    cv::Mat b;
    m.convertTo(b, CV_8U, m.depth() == CV_16U ? 1.0 / 257.0 : 255.0);
    m = b;
  }
  Image img(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x) {
      // OpenCV stores BGR.
      img.at(y, x, 0) = row[x][2] / 255.f;
      img.at(y, x, 1) = row[x][1] / 255.f;
      img.at(y, x, 2) = row[x][0] / 255.f;
    }
  }
  return img;
}

void write_image(const Image& img, const std::string& path) {
  if (img.h < 1 || img.w < 1) throw InvalidParameterError("write_image: empty image");
  cv::Mat m(img.h, img.w, CV_8UC3);
  for (int y = 0; y < img.h; ++y) {
    cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.w; ++x) {
      row[x][2] = quantize8(img.at(y, x, 0));
      row[x][1] = quantize8(img.at(y, x, 1));
      row[x][0] = quantize8(img.at(y, x, 2));
    }
  }
  if (!cv::imwrite(path, m)) throw DataError("cannot write image: " + path);
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (img.h == out_h && img.w == out_w) return img;
  cv::Mat src(img.h, img.w, CV_32FC3, const_cast<float*>(img.px.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(out_w, out_h), 0, 0, cv::INTER_LINEAR);
  Image out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const cv::Vec3f* row = dst.ptr<cv::Vec3f>(y);
    for (int x = 0; x < out_w; ++x) {
      out.at(y, x, 0) = row[x][0];
      out.at(y, x, 1) = row[x][1];
      out.at(y, x, 2) = row[x][2];
    }
  }
  return out;
}

Image clamp01(Image img) {
  for (float& v : img.px) v = v < 0.f ? 0.f : v > 1.f ? 1.f : v;
  return img;
}

}  // namespace hazegan
