#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "auverify/metrics.hpp"

namespace auverify {

struct RunCounts {
  std::size_t lines = 0;
  std::size_t processed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

struct Report {
  std::vector<AggregateRow> rows;
  std::vector<F1Row> f1;
  std::vector<MuRecord> records;
  std::vector<std::string> notices;
  RunCounts counts;
};

struct ReportFormats {
  bool csv = true;
  bool json = true;
  bool records = false;
};

inline constexpr const char* kReportCsvHeader = "dataset,au,variant,mean_mu,mean_mu_w,n,n_undefined";
inline constexpr const char* kF1CsvHeader = "dataset,au,tp,fp,fn,f1";
inline constexpr const char* kRecordCsvHeader =
    "image_id,au,mu,mu_w,inside,total,box_area_fraction";

namespace detail {

/// Means are reported with six decimals in every format.
inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline double rounded6(double v) { return std::stod(fixed6(v)); }

inline std::string precise(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace detail

inline std::string report_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << kReportCsvHeader << '\n';
  for (const auto& r : rows) {
    os << detail::csv_field(r.dataset) << ',' << r.au << ',' << r.variant << ','
       << detail::fixed6(r.mean_mu) << ',' << detail::fixed6(r.mean_mu_w) << ',' << r.n << ','
       << r.n_undefined << '\n';
  }
  return os.str();
}

inline std::string f1_csv(const std::vector<F1Row>& rows) {
  std::ostringstream os;
  os << kF1CsvHeader << '\n';
  for (const auto& r : rows) {
    os << detail::csv_field(r.dataset) << ',' << r.au << ',' << r.counts.tp << ','
       << r.counts.fp << ',' << r.counts.fn << ',' << detail::fixed6(r.f1) << '\n';
  }
  return os.str();
}

inline std::string records_csv(const std::vector<MuRecord>& records) {
  std::ostringstream os;
  os << kRecordCsvHeader << '\n';
  for (const auto& r : records) {
    os << detail::csv_field(r.image_id) << ',' << r.au << ','
       << (r.mu ? detail::precise(*r.mu) : "") << ','
       << (r.mu_w ? detail::precise(*r.mu_w) : "") << ',' << detail::precise(r.inside) << ','
       << detail::precise(r.total) << ',' << detail::precise(r.box_area_fraction) << '\n';
  }
  return os.str();
}

inline nlohmann::json report_json(const Report& report) {
  using nlohmann::json;
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"dataset", r.dataset},
                    {"au", r.au},
                    {"variant", r.variant},
                    {"mean_mu", detail::rounded6(r.mean_mu)},
                    {"mean_mu_w", detail::rounded6(r.mean_mu_w)},
                    {"n", r.n},
                    {"n_undefined", r.n_undefined}});
  }
  json f1 = json::array();
  for (const auto& r : report.f1) {
    f1.push_back({{"dataset", r.dataset},
                  {"au", r.au},
                  {"tp", r.counts.tp},
                  {"fp", r.counts.fp},
                  {"fn", r.counts.fn},
                  {"f1", detail::rounded6(r.f1)}});
  }
  return json{{"rows", rows}, {"f1", f1}, {"notices", report.notices}};
}

/// Writes report.csv / report.json / f1.csv and optionally one
/// records_<variant>.csv per variant.
inline std::vector<std::filesystem::path> emit_report(const Report& report,
                                                      const std::filesystem::path& dir,
                                                      ReportFormats formats = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& content) {
    detail::write_file(dir / name, content);
    written.push_back(dir / name);
  };
  if (formats.csv) {
    put("report.csv", report_csv(report.rows));
    put("f1.csv", f1_csv(report.f1));
  }
  if (formats.json) put("report.json", report_json(report).dump(2) + "\n");
  if (formats.records) {
    std::map<std::string, std::vector<MuRecord>> by_variant;
    for (const auto& r : report.records) by_variant[r.variant.name()].push_back(r);
    for (const auto& [variant, recs] : by_variant) {
      put("records_" + variant + ".csv", records_csv(recs));
    }
  }
  return written;
}

inline std::vector<AggregateRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader) {
    throw ParseError("report CSV header mismatch");
  }
  std::vector<AggregateRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 7) {
      throw ParseError("report CSV line " + std::to_string(line_no) + " has " +
                       std::to_string(f.size()) + " fields");
    }
    rows.push_back({f[0], f[1], f[2], std::stod(f[3]), std::stod(f[4]),
                    static_cast<std::size_t>(std::stoull(f[5])),
                    static_cast<std::size_t>(std::stoull(f[6]))});
  }
  return rows;
}

inline std::vector<AggregateRow> read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_report_csv(buf.str());
}

}  // namespace auverify
