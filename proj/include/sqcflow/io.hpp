#pragma once

// CSV and JSON serialization. Reals are written with 17 significant digits
// through std::to_chars, so output is locale-independent and round-trips.

#include "sqcflow/core.hpp"
#include "sqcflow/estimate.hpp"
#include "sqcflow/verify.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <ostream>
#include <set>

namespace sqcflow {

using Json = nlohmann::ordered_json;

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// RFC-4180 quoting for fields that need it.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_field(fields[i]);
    }
    out_ << '\n';
  }

 private:
  std::ostream& out_;
};

/// Long-format trace: t, x1..xn, h, grad_norm, then diagnostics by name.
inline void write_trace_csv(std::ostream& out, const Trajectory& traj) {
  CsvWriter csv(out);
  const std::size_t n = traj.empty() ? 0 : static_cast<std::size_t>(traj.front().state.size());
  std::set<std::string> diag_names;
  for (const auto& s : traj.samples())
    for (const auto& [k, v] : s.diagnostics) diag_names.insert(k);

  std::vector<std::string> header = {"t"};
  for (std::size_t i = 0; i < n; ++i) header.push_back("x" + std::to_string(i + 1));
  header.push_back("h");
  header.push_back("grad_norm");
  header.insert(header.end(), diag_names.begin(), diag_names.end());
  csv.row(header);

  for (const auto& s : traj.samples()) {
    std::vector<std::string> f = {format_real(s.t)};
    for (std::size_t i = 0; i < n; ++i) f.push_back(format_real(s.state[static_cast<Eigen::Index>(i)]));
    f.push_back(format_real(s.h));
    f.push_back(format_real(s.grad_norm));
    for (const auto& name : diag_names) {
      auto it = s.diagnostics.find(name);
      f.push_back(it == s.diagnostics.end() ? "" : format_real(it->second));
    }
    csv.row(f);
  }
}

/// Witness table of a report: index, x1..xn, y1..yn, lambda, lhs, rhs, margin.
inline void write_witness_csv(std::ostream& out, const std::vector<ClassReport>& reports, int dim) {
  CsvWriter csv(out);
  std::vector<std::string> header = {"property"};
  for (int i = 0; i < dim; ++i) header.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < dim; ++i) header.push_back("y" + std::to_string(i + 1));
  for (const char* c : {"lambda", "lhs", "rhs", "margin"}) header.emplace_back(c);
  csv.row(header);
  for (const auto& r : reports) {
    for (const auto& w : r.violations) {
      std::vector<std::string> f = {r.property_name};
      for (int i = 0; i < dim; ++i) f.push_back(format_real(w.x[i]));
      for (int i = 0; i < dim; ++i) f.push_back(format_real(w.y[i]));
      f.push_back(w.lambda ? format_real(*w.lambda) : "");
      f.push_back(format_real(w.lhs));
      f.push_back(format_real(w.rhs));
      f.push_back(format_real(w.margin));
      csv.row(f);
    }
  }
}

// nlohmann writes NaN as null; reals otherwise use its shortest round-trip form.
inline Json to_json(const Point& p) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p[i]);
  return a;
}

inline Json to_json(const Witness& w) {
  Json j;
  j["x"] = to_json(w.x);
  j["y"] = to_json(w.y);
  j["lambda"] = w.lambda ? Json(*w.lambda) : Json(nullptr);
  j["lhs"] = w.lhs;
  j["rhs"] = w.rhs;
  j["margin"] = w.margin;
  return j;
}

inline Json to_json(const ClassReport& r) {
  Json j;
  j["property_name"] = r.property_name;
  j["parameter"] = r.parameter;
  j["holds_on_samples"] = r.holds_on_samples;
  j["violation_count"] = r.violation_count;
  j["samples_tested"] = r.samples_tested;
  j["premise_hits"] = r.premise_hits;
  Json v = Json::array();
  for (const auto& w : r.violations) v.push_back(to_json(w));
  j["violations"] = std::move(v);
  return j;
}

inline Json to_json(const RateCertificate& c) {
  Json j;
  j["kind"] = to_string(c.kind);
  j["label"] = c.label;
  j["satisfied"] = c.satisfied;
  j["theoretical_rate"] = c.theoretical_rate;
  j["empirical_rate"] = c.empirical_rate;
  j["rate_type"] = c.continuous ? "exponent" : "per_step_factor";
  j["first_violation"] = c.first_violation ? Json(*c.first_violation) : Json(nullptr);
  j["checks"] = c.checks;
  j["reference_based"] = c.reference_based;
  Json consts = Json::object();
  for (const auto& [k, v] : c.constants) consts[k] = v;
  j["constants"] = std::move(consts);
  j["notes"] = c.notes;
  return j;
}

inline Json to_json(const Estimate& e) {
  return Json{{"value", e.value}, {"safety_adjusted_value", e.safety_adjusted}, {"samples", e.samples}};
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidParameter, "cannot write " + path);
  f << content;
}

inline void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace sqcflow
