#pragma once

#include "driftless/dlv.hpp"
#include "driftless/frictions.hpp"
#include "driftless/hedging.hpp"
#include "driftless/market.hpp"
#include "driftless/measure.hpp"
#include "driftless/trainer.hpp"
#include "driftless/utility.hpp"
#include "driftless/var_model.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace driftless {

using Json = nlohmann::json;
namespace fs = std::filesystem;

/// Shortest representation that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

/// Writes to a sibling temporary file, then renames over the target.
void write_text_atomic(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const fs::path& path);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};
/// Numeric CSV with a header line. Throws Io on unreadable files and
/// Validation on malformed rows.
CsvTable read_csv(const fs::path& path);
std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& j);

/// Rejects keys outside allowed (context names the document in errors).
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& context);

Json to_json(const DlvGrid& grid);
DlvGrid grid_from_json(const Json& j);

Json to_json(const CostSpec& spec);
CostSpec cost_spec_from_json(const Json& j);

Json to_json(const Utility& u);
Utility utility_from_json(const Json& j);

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);

Json to_json(const PayoffSpec& p);
PayoffSpec payoff_from_json(const Json& j);

Json to_json(const InstrumentSpec& s);
InstrumentSpec instrument_from_json(const Json& j);

/// VAR parameters together with the grid and starting states they drive.
struct VarSpec {
    VarParams params;
    DlvGrid grid;
    Eigen::VectorXd init_prev;
    Eigen::VectorXd init;
};
Json to_json(const VarSpec& v);
VarSpec var_spec_from_json(const Json& j);

Json to_json(const Solution& s);
Solution solution_from_json(const Json& j);
std::string trace_csv(const Solution& s);

/// Bundle directory: meta.json, paths.csv and, when present, weights.csv.
void save_bundle(const fs::path& dir, const PathBundle& bundle);
PathBundle load_bundle(const fs::path& dir);

std::string weights_csv(std::span<const double> weights);
std::vector<double> read_weights_csv(const fs::path& path);

std::string history_csv(const Eigen::MatrixXd& history, const DlvGrid& grid);
Eigen::MatrixXd read_history_csv(const fs::path& path);

std::string surface_csv(const DlvSurface& surface);
DlvSurface read_surface_csv(const fs::path& path, double boundary_lo, double boundary_hi = -1.0);

std::string histogram_csv(const Histogram& h);

std::string drift_csv(const DriftReport& report);
Json to_json(const DriftReport& report);

Json to_json(const PnlStats& s);

}  // namespace driftless
