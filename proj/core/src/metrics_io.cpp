#include "ntklab/metrics_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ntklab/error.hpp"
#include "ntklab/keyvalue.hpp"

namespace ntklab {

namespace {

std::string cell(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? cell(*v) : std::string(); }

double parse_real_cell(const std::string& s, std::size_t line) {
  if (s.empty()) throw DataError("metrics line " + std::to_string(line) + ": missing value");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw DataError("metrics line " + std::to_string(line) + ": bad number `" + s + "`");
  return v;
}

std::optional<double> parse_optional_cell(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  return parse_real_cell(s, line);
}

std::size_t parse_index_cell(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw DataError("metrics line " + std::to_string(line) + ": bad integer `" + s + "`");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

bool MetricRecord::poisoned() const { return std::isnan(lambda_max); }

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = split(kMetricsColumns, ',');
  return names;
}

std::string format_metrics_csv(const std::vector<MetricRecord>& records) {
  std::string out = std::string(kMetricsVersionLine) + "\n" + kMetricsColumns + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.global_step) + ',' + std::to_string(r.task_index) + ',' + std::to_string(r.iteration) + ',' +
           cell(r.lambda_max) + ',' + cell(r.kernel_distance_from_init) + ',' + cell(r.kernel_distance_from_prev) + ',' +
           cell(r.velocity) + ',' + cell(r.alignment) + ',' + cell(r.train_loss) + ',' + cell(r.task1_test_accuracy) +
           '\n';
  }
  return out;
}

std::vector<MetricRecord> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsVersionLine) {
    throw VersionError("metrics file does not start with `" + std::string(kMetricsVersionLine) + "`");
  }
  if (!std::getline(in, line) || line != kMetricsColumns) {
    throw VersionError("metrics column header does not match this version");
  }
  std::vector<MetricRecord> records;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 10) {
      throw DataError("metrics line " + std::to_string(line_no) + ": expected 10 fields, got " + std::to_string(f.size()));
    }
    MetricRecord r;
    r.global_step = parse_index_cell(f[0], line_no);
    r.task_index = parse_index_cell(f[1], line_no);
    r.iteration = parse_index_cell(f[2], line_no);
    r.lambda_max = parse_real_cell(f[3], line_no);
    r.kernel_distance_from_init = parse_real_cell(f[4], line_no);
    r.kernel_distance_from_prev = parse_optional_cell(f[5], line_no);
    r.velocity = parse_optional_cell(f[6], line_no);
    r.alignment = parse_real_cell(f[7], line_no);
    r.train_loss = parse_optional_cell(f[8], line_no);
    r.task1_test_accuracy = parse_real_cell(f[9], line_no);
    records.push_back(r);
  }
  return records;
}

void write_metrics_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << format_metrics_csv(records);
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metrics_csv(buf.str());
}

std::optional<double> metric_value(const MetricRecord& r, const std::string& name) {
  if (name == "global_step") return static_cast<double>(r.global_step);
  if (name == "task_index") return static_cast<double>(r.task_index);
  if (name == "iteration") return static_cast<double>(r.iteration);
  if (name == "lambda_max") return r.lambda_max;
  if (name == "kernel_distance_from_init") return r.kernel_distance_from_init;
  if (name == "kernel_distance_from_prev") return r.kernel_distance_from_prev;
  if (name == "velocity") return r.velocity;
  if (name == "alignment") return r.alignment;
  if (name == "train_loss") return r.train_loss;
  if (name == "task1_test_accuracy") return r.task1_test_accuracy;
  throw UsageError("unknown metric `" + name + "`");
}

}  // namespace ntklab
