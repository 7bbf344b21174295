#pragma once

// Configuration files and CSV / JSON serialization.
//
// A run configuration is a flat JSON object. It can be read from either a
// key = value file or a JSON document (a top-level "config" member is used
// when present, so JSON output feeds back in as input).

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ycel/dynamics.hpp"
#include "ycel/entanglement.hpp"
#include "ycel/fock_oracle.hpp"
#include "ycel/model.hpp"

namespace ycel::io {

using json = nlohmann::ordered_json;

/// '#' comments, blank lines, `key = value` pairs. Numbers and true/false are
/// typed; everything else stays a string. Throws ConfigurationError.
json parse_flat_config(std::istream& in, const std::string& source = "<input>");
json parse_config_text(const std::string& text, const std::string& source = "<input>");
json load_config(const std::string& path);

/// %.12g; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double v);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// "# key = value" per config entry, then "# line" per extra line.
void write_comments(std::ostream& os, const json& config, const std::vector<std::string>& extra);

/// One "# key = value" line per config entry, then `extra` comment lines,
/// then the column header and rows.
void write_csv(std::ostream& os, const json& config, const std::vector<std::string>& extra,
               const CsvTable& table);

std::vector<std::string> moment_columns();  // n1, n2, n3, c32, c31, c21

json to_json(const SecondMoments<double>& m);
json to_json(const Prefactors<double>& f);
json to_json(const AtomPreparation<double>& p);
json to_json(const WitnessRecord& r);
json to_json(const VlfReport& r);
json to_json(const Vector3c<double>& eigenvalues);  // [[re, im], ...]
json to_json(const SweepRow& row);

CsvTable trajectory_table(const Trajectory<double>& traj);
CsvTable oracle_table(const fock::OracleRun& run);
CsvTable sweep_table(const std::vector<SweepRow>& rows);

}  // namespace ycel::io
