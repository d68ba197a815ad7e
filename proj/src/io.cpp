#include "driftless/io.hpp"
#include "driftless/error.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace driftless {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw Error(ErrorKind::Validation, "not a number: '" + std::string(s) + "'");
    }
    return v;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create directory " + path.parent_path().string());
    }
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorKind::Io, "cannot move output into place at " + path.string());
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::Io, "SHA-256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out.push_back(hex[md[k] >> 4]);
        out.push_back(hex[md[k] & 15]);
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return std::string(s);
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
    const std::string text = read_text(path);
    CsvTable t;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const auto cells = split(line);
        if (t.header.empty()) {
            for (auto c : cells) t.header.push_back(trim(c));
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw Error(ErrorKind::Validation, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                                   std::to_string(t.header.size()) + " columns");
        }
        std::vector<double> row(cells.size());
        for (std::size_t k = 0; k < cells.size(); ++k) {
            try {
                row[k] = parse_double(cells[k]);
            } catch (const Error& e) {
                throw Error(ErrorKind::Validation, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw Error(ErrorKind::Validation, path.string() + ": missing header");
    return t;
}

std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
    std::string out;
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (k) out += ',';
        out += header[k];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out += ',';
            out += format_double(row[k]);
        }
        out += '\n';
    }
    return out;
}

Json read_json(const fs::path& path) {
    const std::string text = read_text(path);
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Validation, path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const Json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& context) {
    if (!j.is_object()) throw Error(ErrorKind::Validation, context + ": expected a JSON object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || item.key() == a;
        if (!ok) throw Error(ErrorKind::Validation, context + ": unknown key '" + item.key() + "'");
    }
}

namespace {

template <class T>
T get(const Json& j, const char* key, const std::string& context) {
    if (!j.contains(key)) throw Error(ErrorKind::Validation, context + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Validation, context + ": bad value for '" + key + "': " + e.what());
    }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, const std::string& context) {
    if (!j.contains(key)) return fallback;
    return get<T>(j, key, context);
}

Json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json mat_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd mat_from(const Json& j, const std::string& context) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw Error(ErrorKind::Validation, context + ": ragged matrix");
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

double days_of(double tau) {
    const double d = tau * kDaysPerYear;
    return std::abs(d - std::round(d)) < 1e-9 ? std::round(d) : d;
}

}  // namespace

Json to_json(const DlvGrid& grid) {
    std::vector<double> days;
    for (double t : grid.maturities) days.push_back(days_of(t));
    return Json{{"strikes", grid.strikes},
                {"maturity_days", days},
                {"boundary_lo", grid.boundary_lo},
                {"boundary_hi", grid.boundary_hi}};
}

DlvGrid grid_from_json(const Json& j) {
    const std::string ctx = "grid";
    check_keys(j, {"strikes", "maturity_days", "boundary_lo", "boundary_hi"}, ctx);
    return make_grid(get<std::vector<double>>(j, "strikes", ctx), get<std::vector<double>>(j, "maturity_days", ctx),
                     get<double>(j, "boundary_lo", ctx), get_or<double>(j, "boundary_hi", -1.0, ctx));
}

Json to_json(const CostSpec& spec) {
    Json j{{"gamma", spec.gamma}, {"mode", to_string(spec.mode)}};
    j["vega_cap"] = spec.vega_cap ? Json(*spec.vega_cap) : Json(nullptr);
    return j;
}

CostSpec cost_spec_from_json(const Json& j) {
    const std::string ctx = "cost spec";
    check_keys(j, {"gamma", "vega_cap", "mode"}, ctx);
    CostSpec s;
    if (j.contains("gamma")) {
        if (j["gamma"].is_number()) s.gamma = {j["gamma"].get<double>()};
        else s.gamma = get<std::vector<double>>(j, "gamma", ctx);
    }
    if (j.contains("vega_cap") && !j["vega_cap"].is_null()) s.vega_cap = get<double>(j, "vega_cap", ctx);
    s.mode = cost_mode_from_string(get_or<std::string>(j, "mode", "marginal", ctx));
    if (s.gamma.empty()) throw Error(ErrorKind::Validation, ctx + ": gamma must not be empty");
    for (double g : s.gamma) {
        if (!(g >= 0.0)) throw Error(ErrorKind::Validation, ctx + ": gamma must be >= 0");
    }
    if (s.vega_cap && !(*s.vega_cap > 0.0)) throw Error(ErrorKind::Validation, ctx + ": vega cap must be > 0");
    return s;
}

Json to_json(const Utility& u) { return Json{{"family", u.name()}, {"lambda", u.lambda()}}; }

Utility utility_from_json(const Json& j) {
    const std::string ctx = "utility";
    check_keys(j, {"family", "lambda"}, ctx);
    return Utility(utility_family_from_string(get<std::string>(j, "family", ctx)), get_or<double>(j, "lambda", 1.0, ctx));
}

Json to_json(const TrainConfig& c) {
    return Json{{"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"learning_rate", c.learning_rate},
                {"final_learning_rate", c.final_learning_rate},
                {"seed", c.seed},
                {"clip_norm", c.clip_norm},
                {"y_init", c.y_init},
                {"hidden", c.hidden},
                {"action_scale", c.action_scale},
                {"smooth_abs_eps", c.smooth_abs_eps},
                {"step_bias", c.step_bias},
                {"polish", c.polish}};
}

TrainConfig train_config_from_json(const Json& j) {
    const std::string ctx = "train config";
    check_keys(j,
               {"epochs", "batch_size", "learning_rate", "final_learning_rate", "seed", "clip_norm", "y_init", "hidden",
                "action_scale", "smooth_abs_eps", "step_bias", "polish"},
               ctx);
    TrainConfig c;
    c.epochs = get_or<std::size_t>(j, "epochs", c.epochs, ctx);
    c.batch_size = get_or<std::size_t>(j, "batch_size", c.batch_size, ctx);
    c.learning_rate = get_or<double>(j, "learning_rate", c.learning_rate, ctx);
    c.final_learning_rate = get_or<double>(j, "final_learning_rate", c.final_learning_rate, ctx);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed, ctx);
    c.clip_norm = get_or<double>(j, "clip_norm", c.clip_norm, ctx);
    c.y_init = get_or<double>(j, "y_init", c.y_init, ctx);
    c.hidden = get_or<std::vector<std::size_t>>(j, "hidden", c.hidden, ctx);
    c.action_scale = get_or<double>(j, "action_scale", c.action_scale, ctx);
    c.smooth_abs_eps = get_or<double>(j, "smooth_abs_eps", c.smooth_abs_eps, ctx);
    c.step_bias = get_or<bool>(j, "step_bias", c.step_bias, ctx);
    c.polish = get_or<bool>(j, "polish", c.polish, ctx);
    c.validate();
    return c;
}

Json to_json(const PayoffSpec& p) {
    Json j{{"kind", to_string(p.kind)},
           {"rel_strike", p.rel_strike},
           {"maturity_steps", p.maturity_steps},
           {"side", p.side}};
    if (p.kind == PayoffSpec::Kind::CustomTable) {
        Json t = Json::array();
        for (const auto& [x, v] : p.table) t.push_back({x, v});
        j["table"] = t;
    }
    return j;
}

PayoffSpec payoff_from_json(const Json& j) {
    const std::string ctx = "payoff";
    check_keys(j, {"kind", "rel_strike", "maturity_steps", "side", "table"}, ctx);
    PayoffSpec p;
    p.kind = payoff_kind_from_string(get<std::string>(j, "kind", ctx));
    p.rel_strike = get_or<double>(j, "rel_strike", 1.0, ctx);
    p.maturity_steps = get<std::size_t>(j, "maturity_steps", ctx);
    p.side = get_or<double>(j, "side", -1.0, ctx);
    if (j.contains("table")) {
        for (const auto& row : j["table"]) {
            const auto kv = row.get<std::vector<double>>();
            if (kv.size() != 2) throw Error(ErrorKind::Validation, ctx + ": table rows are [moneyness, value]");
            p.table.emplace_back(kv[0], kv[1]);
        }
    }
    return p;
}

Json to_json(const InstrumentSpec& s) {
    switch (s.kind) {
    case InstrumentSpec::Kind::Spot: return Json{{"kind", "spot"}};
    case InstrumentSpec::Kind::Call: return Json{{"kind", "call"}, {"strike", s.rel_strike}, {"days", s.ttm_days}};
    case InstrumentSpec::Kind::Put: return Json{{"kind", "put"}, {"strike", s.rel_strike}, {"days", s.ttm_days}};
    }
    return {};
}

InstrumentSpec instrument_from_json(const Json& j) {
    const std::string ctx = "instrument";
    check_keys(j, {"kind", "strike", "days"}, ctx);
    const auto kind = get<std::string>(j, "kind", ctx);
    if (kind == "spot") return InstrumentSpec::spot();
    const double k = get<double>(j, "strike", ctx);
    const int d = get<int>(j, "days", ctx);
    if (!(k > 0.0) || d <= 0) throw Error(ErrorKind::Validation, ctx + ": strike and days must be positive");
    if (kind == "call") return InstrumentSpec::call(k, d);
    if (kind == "put") return InstrumentSpec::put(k, d);
    throw Error(ErrorKind::Validation, ctx + ": unknown kind '" + kind + "'");
}

Json to_json(const VarSpec& v) {
    const VarParams& p = v.params;
    return Json{{"dim", p.dim},     {"dt", p.dt},         {"a1", mat_json(p.a1)},
                {"a2", mat_json(p.a2)}, {"chol", mat_json(p.chol)}, {"b", vec_json(p.b)},
                {"grid", to_json(v.grid)}, {"init_prev", vec_json(v.init_prev)}, {"init", vec_json(v.init)}};
}

VarSpec var_spec_from_json(const Json& j) {
    const std::string ctx = "VAR params";
    check_keys(j, {"dim", "dt", "a1", "a2", "chol", "b", "grid", "init_prev", "init"}, ctx);
    VarSpec v;
    try {
        v.params.dim = get<std::size_t>(j, "dim", ctx);
        v.params.dt = get_or<double>(j, "dt", 1.0 / kDaysPerYear, ctx);
        v.params.a1 = mat_from(j.at("a1"), ctx);
        v.params.a2 = mat_from(j.at("a2"), ctx);
        v.params.chol = mat_from(j.at("chol"), ctx);
        v.params.b = vec_from(get<std::vector<double>>(j, "b", ctx));
        v.init_prev = vec_from(get<std::vector<double>>(j, "init_prev", ctx));
        v.init = vec_from(get<std::vector<double>>(j, "init", ctx));
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::Validation, ctx + ": " + e.what());
    }
    v.grid = grid_from_json(get<Json>(j, "grid", ctx));
    v.params.validate();
    const auto d = static_cast<Eigen::Index>(v.params.dim);
    if (v.init.size() != d || v.init_prev.size() != d) throw Error(ErrorKind::Validation, ctx + ": init length != dim");
    if (v.params.dim != 1 + v.grid.n_nodes()) throw Error(ErrorKind::Validation, ctx + ": dim must be 1 + grid nodes");
    return v;
}

Json to_json(const Solution& s) {
    Json layers = Json::array();
    for (const auto& l : s.policy.mlp.layers()) {
        layers.push_back(Json{{"weight", mat_json(l.weight)}, {"bias", vec_json(l.bias)}});
    }
    auto row = [](const Eigen::RowVectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    Json out{{"layers", layers},
                {"in_shift", row(s.policy.in_shift)},
                {"in_scale", row(s.policy.in_scale)},
                {"out_scale", row(s.policy.out_scale)},
                {"y_star", s.y_star},
                {"objective_value", s.objective_value},
                {"best_epoch", s.best_epoch},
                {"config", to_json(s.config)}};
    if (s.policy.step_bias.size() > 0) out["step_bias"] = mat_json(s.policy.step_bias);
    return out;
}

Solution solution_from_json(const Json& j) {
    const std::string ctx = "solution";
    check_keys(j, {"layers", "in_shift", "in_scale", "out_scale", "y_star", "objective_value", "best_epoch", "config",
                   "step_bias", "instruments"},
               ctx);
    Solution s;
    std::vector<DenseLayer> layers;
    for (const auto& l : get<Json>(j, "layers", ctx)) {
        layers.push_back({mat_from(l.at("weight"), ctx), vec_from(l.at("bias").get<std::vector<double>>())});
    }
    s.policy.mlp = Mlp(std::move(layers));
    auto row = [&](const char* key) {
        const auto v = get<std::vector<double>>(j, key, ctx);
        return Eigen::RowVectorXd(Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    s.policy.in_shift = row("in_shift");
    s.policy.in_scale = row("in_scale");
    s.policy.out_scale = row("out_scale");
    if (static_cast<std::size_t>(s.policy.in_shift.size()) != s.policy.mlp.input_width() ||
        static_cast<std::size_t>(s.policy.in_scale.size()) != s.policy.mlp.input_width() ||
        static_cast<std::size_t>(s.policy.out_scale.size()) != s.policy.mlp.output_width()) {
        throw Error(ErrorKind::Validation, ctx + ": normalisation widths do not match the network");
    }
    if (j.contains("step_bias")) {
        s.policy.step_bias = mat_from(j["step_bias"], ctx);
        if (static_cast<std::size_t>(s.policy.step_bias.cols()) != s.policy.mlp.output_width()) {
            throw Error(ErrorKind::Validation, ctx + ": step offsets do not match the network");
        }
    }
    s.y_star = get<double>(j, "y_star", ctx);
    s.objective_value = get<double>(j, "objective_value", ctx);
    s.best_epoch = get_or<std::size_t>(j, "best_epoch", 0, ctx);
    if (j.contains("config")) s.config = train_config_from_json(j["config"]);
    return s;
}

std::string trace_csv(const Solution& s) {
    std::vector<std::vector<double>> rows;
    for (std::size_t e = 0; e < s.trace.size(); ++e) rows.push_back({static_cast<double>(e + 1), s.trace[e]});
    return csv_text({"epoch", "objective"}, rows);
}

namespace {

std::vector<std::string> path_header(const DlvGrid& grid) {
    std::vector<std::string> h{"path", "step", "spot"};
    for (std::size_t j = 0; j < grid.n_maturities(); ++j) {
        for (std::size_t i = 0; i < grid.n_strikes(); ++i) {
            h.push_back("dlv_" + std::to_string(j + 1) + "_" + std::to_string(i + 1));
        }
    }
    return h;
}

std::size_t as_index(double v, const std::string& what) {
    if (!(v >= 0.0) || v != std::floor(v)) throw Error(ErrorKind::Validation, what + " must be a non-negative integer");
    return static_cast<std::size_t>(v);
}

}  // namespace

void save_bundle(const fs::path& dir, const PathBundle& bundle) {
    bundle.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create bundle directory " + dir.string());
    const auto header = path_header(bundle.grid);
    std::string text;
    for (std::size_t k = 0; k < header.size(); ++k) text += (k ? "," : "") + header[k];
    text += '\n';
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        for (std::size_t t = 0; t <= bundle.n_steps; ++t) {
            text += std::to_string(p) + ',' + std::to_string(t) + ',' + format_double(bundle.spot_at(p, t));
            for (double s : bundle.sigma_at(p, t)) text += ',' + format_double(s);
            text += '\n';
        }
    }
    write_text_atomic(dir / "paths.csv", text);
    if (bundle.weights) {
        write_text_atomic(dir / "weights.csv", weights_csv(*bundle.weights));
    } else {
        fs::remove(dir / "weights.csv", ec);
    }
    Json meta{{"grid", to_json(bundle.grid)},
              {"n_paths", bundle.n_paths},
              {"n_steps", bundle.n_steps},
              {"seed", bundle.seed},
              {"provenance", bundle.provenance},
              {"has_weights", bundle.weights.has_value()}};
    write_json(dir / "meta.json", meta);
}

PathBundle load_bundle(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "bundle directory " + dir.string() + " does not exist");
    const Json meta = read_json(dir / "meta.json");
    const std::string ctx = (dir / "meta.json").string();
    check_keys(meta, {"grid", "n_paths", "n_steps", "seed", "provenance", "has_weights"}, ctx);
    PathBundle b;
    b.grid = grid_from_json(get<Json>(meta, "grid", ctx));
    const auto n_paths = get<std::size_t>(meta, "n_paths", ctx);
    const auto n_steps = get<std::size_t>(meta, "n_steps", ctx);
    b.seed = get_or<std::uint64_t>(meta, "seed", 0, ctx);
    b.provenance = get_or<std::string>(meta, "provenance", "", ctx);
    b.resize(n_paths, n_steps);

    const auto table = read_csv(dir / "paths.csv");
    if (table.header != path_header(b.grid)) {
        throw Error(ErrorKind::Validation, (dir / "paths.csv").string() + ": header does not match the grid");
    }
    if (table.rows.size() != n_paths * (n_steps + 1)) {
        throw Error(ErrorKind::Validation, (dir / "paths.csv").string() + ": expected " +
                                               std::to_string(n_paths * (n_steps + 1)) + " rows");
    }
    std::vector<bool> seen(table.rows.size(), false);
    const std::size_t nodes = b.grid.n_nodes();
    for (const auto& row : table.rows) {
        const std::size_t p = as_index(row[0], "path");
        const std::size_t t = as_index(row[1], "step");
        if (p >= n_paths || t > n_steps) throw Error(ErrorKind::Validation, "paths.csv: index out of range");
        const std::size_t s = b.state_index(p, t);
        if (seen[s]) throw Error(ErrorKind::Validation, "paths.csv: duplicate state");
        seen[s] = true;
        b.spot[s] = row[2];
        std::copy(row.begin() + 3, row.end(), b.dlv.begin() + static_cast<std::ptrdiff_t>(s * nodes));
    }
    if (get_or<bool>(meta, "has_weights", false, ctx)) {
        b.weights = read_weights_csv(dir / "weights.csv");
        if (b.weights->size() != n_paths) throw Error(ErrorKind::Validation, "weights.csv: one weight per path required");
    }
    b.recompute_prices();
    b.validate();
    return b;
}

std::string weights_csv(std::span<const double> weights) {
    std::string text = "path,weight\n";
    for (std::size_t p = 0; p < weights.size(); ++p) text += std::to_string(p) + ',' + format_double(weights[p]) + '\n';
    return text;
}

std::vector<double> read_weights_csv(const fs::path& path) {
    const auto t = read_csv(path);
    if (t.header != std::vector<std::string>{"path", "weight"}) {
        throw Error(ErrorKind::Validation, path.string() + ": expected header path,weight");
    }
    std::vector<double> w(t.rows.size());
    std::vector<bool> seen(t.rows.size(), false);
    for (const auto& row : t.rows) {
        const std::size_t p = as_index(row[0], "path");
        if (p >= w.size() || seen[p]) throw Error(ErrorKind::Validation, path.string() + ": bad path index");
        seen[p] = true;
        if (!(row[1] > 0.0) || !std::isfinite(row[1])) {
            throw Error(ErrorKind::Validation, path.string() + ": weights must be positive");
        }
        w[p] = row[1];
    }
    return w;
}

std::string history_csv(const Eigen::MatrixXd& history, const DlvGrid& grid) {
    std::vector<std::string> header{"r", "dlogS"};
    for (std::size_t j = 0; j < grid.n_maturities(); ++j) {
        for (std::size_t i = 0; i < grid.n_strikes(); ++i) {
            header.push_back("logdlv_" + std::to_string(j + 1) + "_" + std::to_string(i + 1));
        }
    }
    if (static_cast<std::size_t>(history.cols()) + 1 != header.size()) {
        throw Error(ErrorKind::Shape, "history width does not match the grid");
    }
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < history.rows(); ++r) {
        std::vector<double> row{static_cast<double>(r)};
        for (Eigen::Index c = 0; c < history.cols(); ++c) row.push_back(history(r, c));
        rows.push_back(std::move(row));
    }
    return csv_text(header, rows);
}

Eigen::MatrixXd read_history_csv(const fs::path& path) {
    const auto t = read_csv(path);
    if (t.header.size() < 3 || t.header[0] != "r" || t.header[1] != "dlogS") {
        throw Error(ErrorKind::Validation, path.string() + ": expected header r,dlogS,logdlv_...");
    }
    Eigen::MatrixXd h(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size() - 1));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t c = 1; c < t.header.size(); ++c) {
            h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = t.rows[r][c];
        }
    }
    return h;
}

std::string surface_csv(const DlvSurface& surface) {
    std::vector<std::vector<double>> rows;
    const auto& g = surface.grid;
    for (std::size_t j = 0; j < g.n_maturities(); ++j) {
        for (std::size_t i = 0; i < g.n_strikes(); ++i) {
            rows.push_back({days_of(g.maturities[j]), g.strikes[i], surface.at(j, i)});
        }
    }
    return csv_text({"tau_days", "strike", "value"}, rows);
}

DlvSurface read_surface_csv(const fs::path& path, double boundary_lo, double boundary_hi) {
    const auto t = read_csv(path);
    if (t.header != std::vector<std::string>{"tau_days", "strike", "value"}) {
        throw Error(ErrorKind::Validation, path.string() + ": expected header tau_days,strike,value");
    }
    std::vector<double> days, strikes;
    for (const auto& row : t.rows) {
        if (std::find(days.begin(), days.end(), row[0]) == days.end()) days.push_back(row[0]);
        if (std::find(strikes.begin(), strikes.end(), row[1]) == strikes.end()) strikes.push_back(row[1]);
    }
    std::sort(days.begin(), days.end());
    std::sort(strikes.begin(), strikes.end());
    if (t.rows.size() != days.size() * strikes.size()) {
        throw Error(ErrorKind::Validation, path.string() + ": surface must cover a full maturity x strike grid");
    }
    DlvGrid grid = make_grid(strikes, days, boundary_lo, boundary_hi);
    std::vector<double> sigma(grid.n_nodes(), std::nan(""));
    for (const auto& row : t.rows) {
        const auto j = static_cast<std::size_t>(std::find(days.begin(), days.end(), row[0]) - days.begin());
        const auto i = static_cast<std::size_t>(std::find(strikes.begin(), strikes.end(), row[1]) - strikes.begin());
        if (!std::isnan(sigma[j * strikes.size() + i])) {
            throw Error(ErrorKind::Validation, path.string() + ": duplicate surface node");
        }
        sigma[j * strikes.size() + i] = row[2];
    }
    return DlvSurface(std::move(grid), std::move(sigma));
}

std::string histogram_csv(const Histogram& h) {
    std::vector<std::vector<double>> rows;
    for (std::size_t b = 0; b < h.counts.size(); ++b) rows.push_back({h.edges[b], h.edges[b + 1], h.counts[b]});
    return csv_text({"bin_lo", "bin_hi", "count"}, rows);
}

std::string drift_csv(const DriftReport& report) {
    std::string text = "t,instrument,mean_dh,se,band_lo,band_hi,pass\n";
    for (const auto& r : report.rows) {
        text += std::to_string(r.t) + ',' + r.label + ',' + format_double(r.mean_dh) + ',' + format_double(r.se) + ',' +
                format_double(r.band_lo) + ',' + format_double(r.band_hi) + ',' + (r.pass ? "1" : "0") + '\n';
    }
    return text;
}

Json to_json(const DriftReport& report) {
    auto rows = [](const std::vector<DriftRow>& v) {
        Json out = Json::array();
        for (const auto& r : v) {
            out.push_back(Json{{"t", r.t},
                               {"instrument", r.label},
                               {"bucket", r.bucket},
                               {"count", r.count},
                               {"mean_dh", r.mean_dh},
                               {"se", r.se},
                               {"band_lo", r.band_lo},
                               {"band_hi", r.band_hi},
                               {"pass", r.pass}});
        }
        return out;
    };
    return Json{{"z", report.z},
                {"rows", rows(report.rows)},
                {"failures", report.failures()},
                {"all_pass", report.all_pass()},
                {"buckets", rows(report.buckets)},
                {"bucket_failures", report.bucket_failures()}};
}

Json to_json(const PnlStats& s) {
    return Json{{"mean", s.mean}, {"std", s.std}, {"q01", s.q01}, {"q99", s.q99}};
}

}  // namespace driftless
