#include "tada_app/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace tada::app {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvWriter::Impl {
  std::ofstream out;
  bool row_started = false;
};

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : impl_(new Impl) {
  impl_->out.open(path, std::ios::binary);
  if (!impl_->out) throw ConfigError("cannot write '" + path + "'");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << header[i];
  }
  impl_->out << '\n';
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::field(const std::string& s) {
  if (impl_->row_started) impl_->out << ',';
  impl_->out << s;
  impl_->row_started = true;
}

void CsvWriter::field(double v) { field(format_double(v)); }

void CsvWriter::field(long long v) { field(std::to_string(v)); }

void CsvWriter::end_row() {
  impl_->out << '\n';
  impl_->row_started = false;
}

void write_samples_csv(const std::string& path, const Matrix& samples) {
  std::vector<std::string> header{"sample_id"};
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    header.push_back("dim_" + std::to_string(c));
  }
  CsvWriter csv(path, header);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    csv.field(static_cast<long long>(i));
    for (Eigen::Index c = 0; c < samples.cols(); ++c) csv.field(samples(i, c));
    csv.end_row();
  }
}

void write_scatter_ppm(const std::string& path, const Matrix& samples) {
  constexpr int kSize = 512;
  std::vector<unsigned char> img(kSize * kSize * 3, 255);

  const int d = static_cast<int>(samples.cols());
  const auto x = samples.col(0);
  const Vector y = d > 1 ? Vector(samples.col(1)) : Vector(Vector::Zero(samples.rows()));
  double lo_x = x.minCoeff(), hi_x = x.maxCoeff();
  double lo_y = y.minCoeff(), hi_y = y.maxCoeff();
  const double pad_x = std::max(1e-9, 0.05 * (hi_x - lo_x));
  const double pad_y = std::max(1e-9, 0.05 * (hi_y - lo_y));
  lo_x -= pad_x; hi_x += pad_x; lo_y -= pad_y; hi_y += pad_y;

  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const int px = static_cast<int>((x(i) - lo_x) / (hi_x - lo_x) * (kSize - 1));
    const int py = static_cast<int>((hi_y - y(i)) / (hi_y - lo_y) * (kSize - 1));
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int qx = px + dx, qy = py + dy;
        if (qx < 0 || qx >= kSize || qy < 0 || qy >= kSize) continue;
        unsigned char* p = &img[(qy * kSize + qx) * 3];
        p[0] = 30;
        p[1] = 60;
        p[2] = 160;
      }
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "P6\n" << kSize << ' ' << kSize << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()),
            static_cast<std::streamsize>(img.size()));
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "'");
}

}  // namespace tada::app
