#include "ycel/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ycel/errors.hpp"

namespace ycel::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

json typed_value(const std::string& raw) {
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (!raw.empty()) {
    std::size_t used = 0;
    try {
      const double v = std::stod(raw, &used);
      if (used == raw.size()) return v;
    } catch (const std::exception&) {
    }
  }
  return raw;
}

}  // namespace

json parse_flat_config(std::istream& in, const std::string& source) {
  json out = json::object();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string key = eq == std::string::npos ? "" : trim(line.substr(0, eq));
    if (key.empty()) {
      std::ostringstream os;
      os << source << ":" << lineno << ": expected 'key = value'";
      throw ConfigurationError(os.str());
    }
    if (out.contains(key)) {
      std::ostringstream os;
      os << source << ":" << lineno << ": duplicate key '" << key << "'";
      throw ConfigurationError(os.str());
    }
    out[key] = typed_value(trim(line.substr(eq + 1)));
  }
  return out;
}

json parse_config_text(const std::string& text, const std::string& source) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigurationError(source + ": invalid JSON: " + e.what());
    }
    if (doc.contains("config")) doc = doc["config"];
    if (!doc.is_object()) throw ConfigurationError(source + ": configuration must be an object");
    for (const auto& [k, v] : doc.items())
      if (v.is_structured())
        throw ConfigurationError(source + ": configuration value '" + k + "' must be a scalar");
    return doc;
  }
  std::istringstream in(text);
  return parse_flat_config(in, source);
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open configuration file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v == 0 ? 0.0 : v);
  return buf;
}

namespace {

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_number(v.get<double>());
  return v.dump();
}

}  // namespace

void write_comments(std::ostream& os, const json& config, const std::vector<std::string>& extra) {
  for (const auto& [k, v] : config.items()) os << "# " << k << " = " << scalar_text(v) << "\n";
  for (const auto& line : extra) os << "# " << line << "\n";
}

void write_csv(std::ostream& os, const json& config, const std::vector<std::string>& extra,
               const CsvTable& table) {
  write_comments(os, config, extra);
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    os << (i ? "," : "") << table.columns[i];
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
    os << "\n";
  }
}

std::vector<std::string> moment_columns() { return {"n1", "n2", "n3", "c32", "c31", "c21"}; }

json to_json(const SecondMoments<double>& m) {
  json j;
  const auto cols = moment_columns();
  const auto vals = m.values();
  for (std::size_t i = 0; i < 6; ++i) j[cols[i]] = vals[i];
  return j;
}

json to_json(const Prefactors<double>& f) {
  return {{"A", f.A}, {"B", f.B}, {"C", f.C}, {"D", f.D}, {"E", f.E}, {"F", f.F}, {"G", f.G}};
}

json to_json(const AtomPreparation<double>& p) {
  return {{"rho00", p.rho00}, {"rho22", p.rho22}, {"rho33", p.rho33},
          {"rho32", p.rho32}, {"rho30", p.rho30}, {"rho20", p.rho20}};
}

json to_json(const WitnessRecord& r) {
  auto vec = [](const Eigen::Vector3d& v) { return json::array({v(0), v(1), v(2)}); };
  return {{"grouping", to_string(r.grouping)},
          {"lhs", r.lhs},
          {"bound", r.bound},
          {"ratio", r.ratio},
          {"h", vec(r.gains.h)},
          {"g", vec(r.gains.g)},
          {"violated", r.violated}};
}

json to_json(const VlfReport& r) {
  json recs = json::array();
  for (const auto& rec : r.records) recs.push_back(to_json(rec));
  return {{"bipartitions", recs}, {"fully_inseparable", r.fully_inseparable}};
}

json to_json(const Vector3c<double>& eigenvalues) {
  json out = json::array();
  for (int i = 0; i < 3; ++i) out.push_back({eigenvalues(i).real(), eigenvalues(i).imag()});
  return out;
}

namespace {

// JSON has no NaN; unavailable values become null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const SweepRow& row) {
  json j{{"eta1", row.point.eta1},
         {"eta2", row.point.eta2},
         {"valid", row.valid},
         {"stable", row.stable},
         {"margin", number_or_null(row.margin)},
         {"populations",
          {{"rho00", row.populations[0]}, {"rho22", row.populations[1]},
           {"rho33", row.populations[2]}}}};
  if (row.valid) j["prefactors"] = to_json(row.prefactors);
  if (row.moments) j["moments"] = to_json(*row.moments);
  if (row.report) j["witness"] = to_json(*row.report);
  if (!row.note.empty()) j["note"] = row.note;
  return j;
}

CsvTable trajectory_table(const Trajectory<double>& traj) {
  CsvTable t;
  t.columns = {"t"};
  for (const auto& c : moment_columns()) t.columns.push_back(c);
  for (const auto& p : traj.points) {
    std::vector<double> row{p.t};
    for (double v : p.moments.values()) row.push_back(v);
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable oracle_table(const fock::OracleRun& run) {
  CsvTable t;
  t.columns = {"t"};
  for (const auto& c : moment_columns()) t.columns.push_back(c);
  for (const char* c : {"trace_residue", "edge_population", "outside_closure"})
    t.columns.push_back(c);
  for (const auto& s : run.samples) {
    std::vector<double> row{s.t};
    for (double v : s.moments.closure().values()) row.push_back(v);
    row.push_back(s.trace_residue);
    row.push_back(s.edge_population);
    row.push_back(s.moments.outside_closure());
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable sweep_table(const std::vector<SweepRow>& rows) {
  CsvTable t;
  t.columns = {"eta1", "eta2", "valid", "stable", "margin", "rho00", "rho22", "rho33",
               "A",    "B",    "C",     "D",      "E",      "F",     "G"};
  for (const auto& c : moment_columns()) t.columns.push_back(c);
  for (auto b : kBipartitions) t.columns.push_back(std::string("ratio_") + to_string(b));
  for (auto b : kBipartitions) t.columns.push_back(std::string("violated_") + to_string(b));
  t.columns.push_back("fully_inseparable");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : rows) {
    std::vector<double> row{r.point.eta1, r.point.eta2, double(r.valid), double(r.stable),
                            r.margin};
    for (double p : r.populations) row.push_back(p);
    const auto& f = r.prefactors;
    for (double v : {f.A, f.B, f.C, f.D, f.E, f.F, f.G}) row.push_back(r.valid ? v : nan);
    if (r.moments) {
      for (double v : r.moments->values()) row.push_back(v);
    } else {
      row.insert(row.end(), 6, nan);
    }
    if (r.report) {
      for (const auto& rec : r.report->records) row.push_back(rec.ratio);
      for (const auto& rec : r.report->records) row.push_back(rec.violated);
      row.push_back(r.report->fully_inseparable);
    } else {
      row.insert(row.end(), 7, nan);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace ycel::io
