#ifndef TADA_APP_IO_HPP
#define TADA_APP_IO_HPP

#include <string>
#include <vector>

#include "tada/types.hpp"

namespace tada::app {

/// Deterministic CSV writer: doubles are printed with %.17g so repeated runs
/// with the same seed produce byte-identical files.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void field(const std::string& s);
  void field(double v);
  void field(long long v);
  void end_row();

 private:
  struct Impl;
  Impl* impl_;
};

void write_samples_csv(const std::string& path, const Matrix& samples);

/// Minimal rasterized scatter plot (binary PPM, fixed size). Plotting is
/// best-effort output; nothing in the pipeline depends on it.
void write_scatter_ppm(const std::string& path, const Matrix& samples);

void ensure_directory(const std::string& dir);

std::string format_double(double v);

}  // namespace tada::app

#endif  // TADA_APP_IO_HPP
