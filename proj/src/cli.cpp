#include "nom/cli.hpp"

#include "nom/moo.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace nom::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- config parsing --------------------------------------------------------

using Setter = std::function<void(const json&)>;

void apply_section(const json& j, const std::string& path, const std::map<std::string, Setter>& setters)
{
    if (!j.is_object()) throw ConfigError("config: '" + path + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        const std::string where = path.empty() ? key : path + "." + key;
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("config: unknown key '" + where + "'");
        try {
            it->second(value);
        } catch (const json::exception& e) {
            throw ConfigError("config: bad value for '" + where + "': " + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError("config: bad value for '" + where + "': " + e.what());
        }
    }
}

template <class T>
Setter number(T& dst)
{
    return [&dst](const json& v) {
        if (!v.is_number()) throw ConfigError("expected a number");
        dst = v.get<T>();
    };
}

// Non-negative integer literal only; nlohmann would silently wrap -1.
template <class T>
Setter count(T& dst)
{
    return [&dst](const json& v) {
        if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
        dst = v.get<T>();
    };
}

Setter boolean(bool& dst)
{
    return [&dst](const json& v) {
        if (!v.is_boolean()) throw ConfigError("expected true or false");
        dst = v.get<bool>();
    };
}

Setter string_list(std::vector<std::string>& dst)
{
    return [&dst](const json& v) {
        if (!v.is_array()) throw ConfigError("expected an array of strings");
        dst = v.get<std::vector<std::string>>();
    };
}

Setter optimizer_kind(OptimizerKind& dst)
{
    return [&dst](const json& v) {
        const auto s = v.get<std::string>();
        if (s == "sgd") dst = OptimizerKind::sgd;
        else if (s == "adam") dst = OptimizerKind::adam;
        else throw ConfigError("optimizer must be 'sgd' or 'adam'");
    };
}

Setter w_init_kind(WInit& dst)
{
    return [&dst](const json& v) {
        const auto s = v.get<std::string>();
        if (s == "unit") dst = WInit::unit;
        else if (s == "random") dst = WInit::random;
        else throw ConfigError("w_init must be 'unit' or 'random'");
    };
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }
std::string to_string(WInit w) { return w == WInit::unit ? "unit" : "random"; }

const std::vector<std::string> known_optimizers = {"nom", "nelder-mead", "de", "pso"};

// ---- output helpers --------------------------------------------------------

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json report_header(const RunConfig& cfg, std::string_view command, const ProblemSpec* p)
{
    json j;
    j["format_version"] = format_version;
    j["command"] = command;
    if (p) j["problem"] = p->name;
    j["seed"] = cfg.seed;
    j["config"] = config_to_json(cfg);
    return j;
}

std::vector<std::string> x_columns(std::size_t dim)
{
    std::vector<std::string> c;
    for (std::size_t i = 0; i < dim; ++i) c.push_back("x" + std::to_string(i + 1));
    return c;
}

double box_violation(const Box& box, std::span<const double> x)
{
    double v = 0.0;
    for (std::size_t i = 0; i < box.dim(); ++i) v = std::max({v, box.lo[i] - x[i], x[i] - box.hi[i]});
    return v;
}

// Analytic re-evaluation of a candidate, independent of the optimizer's own
// bookkeeping.
struct Verified {
    double f_true = 0.0;
    std::vector<double> violations;
    double max_violation = 0.0;
    bool feasible = false;
};

Verified verify(const ProblemSpec& p, std::size_t objective, std::span<const double> x, double tol)
{
    Verified v;
    v.f_true = eval_objective(p, objective, x);
    v.violations = constraint_violations(p.constraints, x);
    v.max_violation = box_violation(p.box, x);
    for (double c : v.violations) v.max_violation = std::max(v.max_violation, c);
    v.feasible = feasible(p, x, tol);
    return v;
}

std::string constraint_label(const ProblemSpec& p, std::size_t k)
{
    return "viol_g" + std::to_string(k + 1) + (p.constraints[k].kind == ConstraintKind::equality ? "_eq" : "");
}

std::string file_stem(const ProblemSpec& p)
{
    std::string s = p.name;
    for (char& c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) c = '_';
    }
    return s.empty() ? "problem" : s;
}

} // namespace

// ---- RunConfig -------------------------------------------------------------

void RunConfig::finalize()
{
    fit.train.seed = seed;
    nom.seed = seed;
    baselines.de.seed = seed;
    baselines.pso.seed = seed;
    gradcheck.options.seed = seed;
    baselines.nelder_mead.feasibility_tol = nom.feasibility_tol;
    baselines.de.feasibility_tol = nom.feasibility_tol;
    baselines.pso.feasibility_tol = nom.feasibility_tol;

    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("config: " + what);
    };
    require(fit.train.epochs > 0, "train.epochs must be positive");
    require(fit.train.learning_rate > 0.0, "train.learning_rate must be positive");
    require(fit.train.minibatch_size > 0, "train.minibatch_size must be positive");
    require(fit.hidden > 0, "train.hidden must be positive");
    require(fit.grid_n > 0, "train.grid_n must be positive");
    require(nom.epochs > 0, "nom.epochs must be positive");
    require(nom.learning_rate > 0.0, "nom.learning_rate must be positive");
    require(nom.n_starting_points > 0, "nom.n_starting_points must be positive");
    require(nom.penalty_c > 0.0, "nom.penalty_c must be positive");
    require(nom.grid_n > 0, "nom.grid_n must be positive");
    require(nom.w_low <= nom.w_high, "nom.w_low must not exceed nom.w_high");
    require(nom.feasibility_tol >= 0.0, "nom.feasibility_tol must be non-negative");
    require(nom.dedup_tol >= 0.0, "nom.dedup_tol must be non-negative");
    require(!compare.optimizers.empty(), "compare.optimizers must not be empty");
    for (const auto& o : compare.optimizers) {
        require(std::find(known_optimizers.begin(), known_optimizers.end(), o) != known_optimizers.end(),
                "unknown optimizer '" + o + "' (known: nom, nelder-mead, de, pso)");
    }
    require(baselines.rho > 0.0, "baselines.rho must be positive");
    require(baselines.de.population >= 4, "baselines.de.population must be at least 4");
    require(baselines.pso.swarm > 0, "baselines.pso.swarm must be positive");
    require(moo.n_sweep > 0, "moo.n_sweep must be positive");
    require(moo.oracle_resolution >= 100, "moo.oracle_resolution must be at least 100");
    require(minima_study.repetitions > 0, "minima_study.repetitions must be positive");
    require(minima_study.starting_points > 0, "minima_study.starting_points must be positive");
    require(!gradcheck.suites.empty(), "gradcheck.suites must not be empty");
    for (const auto& s : gradcheck.suites) {
        const auto known = gradcheck_suites();
        require(std::find(known.begin(), known.end(), s) != known.end(), "unknown gradcheck suite '" + s + "'");
    }
    require(gradcheck.options.count > 0, "gradcheck.count must be positive");
    require(gradcheck.options.step > 0.0, "gradcheck.step must be positive");
}

void apply_config(const json& j, RunConfig& cfg)
{
    auto& t = cfg.fit.train;
    auto& n = cfg.nom;
    auto& b = cfg.baselines;
    const std::map<std::string, Setter> train = {
        {"epochs", number(t.epochs)},
        {"minibatch_size", count(t.minibatch_size)},
        {"learning_rate", number(t.learning_rate)},
        {"optimizer", optimizer_kind(t.optimizer)},
        {"hidden", count(cfg.fit.hidden)},
        {"grid_n", count(cfg.fit.grid_n)},
    };
    const std::map<std::string, Setter> nom = {
        {"n_starting_points", count(n.n_starting_points)},
        {"penalty_c", number(n.penalty_c)},
        {"epochs", number(n.epochs)},
        {"learning_rate", number(n.learning_rate)},
        {"grid_n", count(n.grid_n)},
        {"w_init", w_init_kind(n.w_init)},
        {"w_low", number(n.w_low)},
        {"w_high", number(n.w_high)},
        {"optimizer", optimizer_kind(n.optimizer)},
        {"feasibility_tol", number(n.feasibility_tol)},
        {"dedup_tol", number(n.dedup_tol)},
        {"keep_best", boolean(n.keep_best)},
    };
    const std::map<std::string, Setter> nelder_mead = {
        {"max_iters", number(b.nelder_mead.max_iters)},
        {"x_tol", number(b.nelder_mead.x_tol)},
        {"f_tol", number(b.nelder_mead.f_tol)},
        {"initial_step", number(b.nelder_mead.initial_step)},
    };
    const std::map<std::string, Setter> de = {
        {"population", count(b.de.population)},
        {"f", number(b.de.f)},
        {"cr", number(b.de.cr)},
        {"generations", number(b.de.generations)},
    };
    const std::map<std::string, Setter> pso = {
        {"swarm", count(b.pso.swarm)},
        {"w", number(b.pso.w)},
        {"c1", number(b.pso.c1)},
        {"c2", number(b.pso.c2)},
        {"iterations", number(b.pso.iterations)},
    };
    const std::map<std::string, Setter> baselines = {
        {"rho", number(b.rho)},
        {"start_grid_n", count(b.start_grid_n)},
        {"nelder_mead", [&](const json& v) { apply_section(v, "baselines.nelder_mead", nelder_mead); }},
        {"de", [&](const json& v) { apply_section(v, "baselines.de", de); }},
        {"pso", [&](const json& v) { apply_section(v, "baselines.pso", pso); }},
    };
    const std::map<std::string, Setter> compare = {
        {"optimizers", string_list(cfg.compare.optimizers)},
    };
    const std::map<std::string, Setter> moo = {
        {"n_sweep", count(cfg.moo.n_sweep)},
        {"oracle_resolution", count(cfg.moo.oracle_resolution)},
        {"excess_tolerance", number(cfg.moo.excess_tolerance)},
    };
    const std::map<std::string, Setter> minima = {
        {"repetitions", count(cfg.minima_study.repetitions)},
        {"starting_points", count(cfg.minima_study.starting_points)},
    };
    const std::map<std::string, Setter> gradcheck = {
        {"suites", string_list(cfg.gradcheck.suites)},
        {"count", count(cfg.gradcheck.options.count)},
        {"step", number(cfg.gradcheck.options.step)},
        {"tolerance", number(cfg.gradcheck.options.tolerance)},
    };
    const std::map<std::string, Setter> top = {
        {"problem",
         [&](const json& v) {
             if (v.is_string()) {
                 cfg.problem = v.get<std::string>();
                 cfg.inline_problem.reset();
             } else if (v.is_object()) {
                 cfg.inline_problem = v;
                 cfg.problem.clear();
             } else {
                 throw ConfigError("expected a problem name, path or object");
             }
         }},
        {"seed", count(cfg.seed)},
        {"out", [&](const json& v) { cfg.out = v.get<std::string>(); }},
        {"train", [&](const json& v) { apply_section(v, "train", train); }},
        {"nom", [&](const json& v) { apply_section(v, "nom", nom); }},
        {"baselines", [&](const json& v) { apply_section(v, "baselines", baselines); }},
        {"compare", [&](const json& v) { apply_section(v, "compare", compare); }},
        {"moo", [&](const json& v) { apply_section(v, "moo", moo); }},
        {"minima_study", [&](const json& v) { apply_section(v, "minima_study", minima); }},
        {"gradcheck", [&](const json& v) { apply_section(v, "gradcheck", gradcheck); }},
    };
    apply_section(j, "", top);
}

RunConfig load_config_file(const fs::path& path, RunConfig base)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path.string() + "': " + e.what());
    }
    apply_config(j, base);
    return base;
}

json config_to_json(const RunConfig& cfg)
{
    const auto& t = cfg.fit.train;
    const auto& n = cfg.nom;
    const auto& b = cfg.baselines;
    json j;
    if (cfg.inline_problem) j["problem"] = *cfg.inline_problem;
    else j["problem"] = cfg.problem;
    j["seed"] = cfg.seed;
    j["train"] = {{"epochs", t.epochs},
                  {"minibatch_size", t.minibatch_size},
                  {"learning_rate", t.learning_rate},
                  {"optimizer", to_string(t.optimizer)},
                  {"hidden", cfg.fit.hidden},
                  {"grid_n", cfg.fit.grid_n}};
    j["nom"] = {{"n_starting_points", n.n_starting_points},
                {"penalty_c", n.penalty_c},
                {"epochs", n.epochs},
                {"learning_rate", n.learning_rate},
                {"grid_n", n.grid_n},
                {"w_init", to_string(n.w_init)},
                {"w_low", n.w_low},
                {"w_high", n.w_high},
                {"optimizer", to_string(n.optimizer)},
                {"feasibility_tol", n.feasibility_tol},
                {"dedup_tol", n.dedup_tol},
                {"keep_best", n.keep_best}};
    j["baselines"] = {
        {"rho", b.rho},
        {"start_grid_n", b.start_grid_n},
        {"nelder_mead",
         {{"max_iters", b.nelder_mead.max_iters},
          {"x_tol", b.nelder_mead.x_tol},
          {"f_tol", b.nelder_mead.f_tol},
          {"initial_step", b.nelder_mead.initial_step}}},
        {"de", {{"population", b.de.population}, {"f", b.de.f}, {"cr", b.de.cr}, {"generations", b.de.generations}}},
        {"pso",
         {{"swarm", b.pso.swarm}, {"w", b.pso.w}, {"c1", b.pso.c1}, {"c2", b.pso.c2}, {"iterations", b.pso.iterations}}},
    };
    j["compare"] = {{"optimizers", cfg.compare.optimizers}};
    j["moo"] = {{"n_sweep", cfg.moo.n_sweep},
                {"oracle_resolution", cfg.moo.oracle_resolution},
                {"excess_tolerance", cfg.moo.excess_tolerance}};
    j["minima_study"] = {{"repetitions", cfg.minima_study.repetitions},
                         {"starting_points", cfg.minima_study.starting_points}};
    j["gradcheck"] = {{"suites", cfg.gradcheck.suites},
                      {"count", cfg.gradcheck.options.count},
                      {"step", cfg.gradcheck.options.step},
                      {"tolerance", cfg.gradcheck.options.tolerance}};
    // `out` is deliberately left out: moving the output directory must not
    // change the artifacts written into it.
    return j;
}

ProblemSpec resolve_problem(const RunConfig& cfg, std::string_view fallback)
{
    try {
        if (cfg.inline_problem) return problem_from_json(*cfg.inline_problem);
        const std::string name = cfg.problem.empty() ? std::string(fallback) : cfg.problem;
        const auto names = problem_names();
        if (std::find(names.begin(), names.end(), name) != names.end()) return get_problem(name);
        if (fs::is_regular_file(name)) return load_problem_file(name);
        throw ConfigError("unknown problem '" + name + "' (not a registered name or a problem file)");
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

// ---- output primitives -----------------------------------------------------

std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

void write_file_atomic(const fs::path& path, std::string_view contents)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out.flush()) throw Error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes)
{
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size())
{
    for (const auto& h : header) cell(std::string_view(h));
    end_row();
}

void CsvWriter::append(std::string_view raw)
{
    if (filled_ == columns_) throw Error("csv: too many cells in row");
    if (filled_) text_ += ',';
    text_ += raw;
    ++filled_;
}

CsvWriter& CsvWriter::cell(double v)
{
    append(format_double(v));
    return *this;
}

CsvWriter& CsvWriter::cell(std::int64_t v)
{
    append(std::to_string(v));
    return *this;
}

CsvWriter& CsvWriter::cell(std::string_view v)
{
    if (v.find_first_of(",\"\n\r") == std::string_view::npos) {
        append(v);
        return *this;
    }
    std::string q = "\"";
    for (char c : v) {
        if (c == '"') q += '"';
        q += c;
    }
    q += '"';
    append(q);
    return *this;
}

void CsvWriter::end_row()
{
    if (filled_ != columns_) throw Error("csv: row has " + std::to_string(filled_) + " cells, expected " +
                                         std::to_string(columns_));
    text_ += '\n';
    filled_ = 0;
}

// ---- surrogates ------------------------------------------------------------

fs::path model_path(const RunConfig& cfg, const ProblemSpec& p, std::size_t index)
{
    return cfg.out / (file_stem(p) + ".f" + std::to_string(index + 1) + ".nomsurr");
}

std::shared_ptr<const SurrogateModel> surrogate_for(const ProblemSpec& p, std::size_t index,
                                                    const RunConfig& cfg, std::ostream& log)
{
    const fs::path path = model_path(cfg, p, index);
    if (fs::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        SurrogateModel m = load_surrogate(bytes);
        if (m.dim() != p.dim) throw Error("model file '" + path.string() + "' has the wrong dimension");
        log << "loaded " << path.string() << "\n";
        return std::make_shared<const SurrogateModel>(std::move(m));
    }
    log << "fitting surrogate for " << p.name << " objective " << index + 1 << "\n";
    SurrogateFit fit = fit_surrogate(p, index, cfg.fit);
    write_file_atomic(path, save_surrogate(fit.model));
    log << "  normalized holdout rmse " << format_double(fit.report.normalized_rmse) << " -> " << path.string()
        << "\n";
    return std::make_shared<const SurrogateModel>(std::move(fit.model));
}

// ---- fit -------------------------------------------------------------------

int cmd_fit(const RunConfig& cfg, std::ostream& log)
{
    const ProblemSpec p = resolve_problem(cfg, "problem2");
    const std::string stem = file_stem(p);
    json report = report_header(cfg, "fit", &p);
    json timing = {{"format_version", format_version}, {"command", "fit"}, {"problem", p.name}};
    std::vector<std::vector<double>> histories;
    for (std::size_t i = 0; i < p.objectives.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        SurrogateFit fit = fit_surrogate(p, i, cfg.fit);
        const double wall = seconds_since(t0);
        const fs::path path = model_path(cfg, p, i);
        write_file_atomic(path, save_surrogate(fit.model));
        const auto& r = fit.report;
        report["objectives"].push_back({{"index", i + 1},
                                        {"model_file", path.filename().string()},
                                        {"train_rmse", r.train_rmse},
                                        {"holdout_rmse", r.holdout_rmse},
                                        {"normalized_rmse", r.normalized_rmse},
                                        {"epochs_run", r.epochs_run},
                                        {"train_points", r.train_points},
                                        {"holdout_points", r.holdout_points}});
        timing["objectives"].push_back({{"index", i + 1}, {"wall_time_seconds", wall}});
        histories.push_back(r.loss_history);
        log << p.name << " f" << i + 1 << ": normalized holdout rmse " << format_double(r.normalized_rmse)
            << " -> " << path.string() << "\n";
    }
    std::vector<std::string> header{"epoch"};
    for (std::size_t i = 0; i < histories.size(); ++i) header.push_back("f" + std::to_string(i + 1) + "_loss");
    CsvWriter csv(header);
    for (std::size_t e = 0; e < histories.front().size(); ++e) {
        csv.cell(e + 1);
        for (const auto& h : histories) csv.cell(h[e]);
        csv.end_row();
    }
    write_file_atomic(cfg.out / ("fit_" + stem + "_loss.csv"), csv.str());
    write_file_atomic(cfg.out / ("fit_" + stem + ".json"), dump(report));
    write_file_atomic(cfg.out / ("fit_" + stem + ".timing.json"), dump(timing));
    return exit_ok;
}

// ---- compare ---------------------------------------------------------------

namespace {

struct CompareRow {
    std::string optimizer;
    std::vector<double> x;
    double f_surrogate = std::nan("");
    Verified check;
    bool converged = true;
    std::uint64_t seed = 0;
    double wall = 0.0;
    std::string error;
};

} // namespace

int cmd_compare(const RunConfig& cfg, std::ostream& log)
{
    const ProblemSpec p = resolve_problem(cfg, "problem2");
    const std::string stem = file_stem(p);
    const bool wants_nom = std::find(cfg.compare.optimizers.begin(), cfg.compare.optimizers.end(), "nom") !=
                           cfg.compare.optimizers.end();
    std::shared_ptr<const SurrogateModel> m;
    if (wants_nom) m = surrogate_for(p, 0, cfg, log);
    const double tol = cfg.nom.feasibility_tol;
    const PenalizedObjective pf = penalized(p, 0, cfg.baselines.rho);

    std::vector<CompareRow> rows;
    std::optional<OptimizeResult> nom_result;
    for (const auto& name : cfg.compare.optimizers) {
        CompareRow row;
        row.optimizer = name;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if (name == "nom") {
                nom_result = optimize(p, m, cfg.nom);
                row.wall = seconds_since(t0);
                const Solution& s = nom_result->best;
                if (!s.error.empty()) throw Error(s.error);
                row.x = s.x;
                row.seed = cfg.nom.seed;
            } else {
                BaselineSolution s;
                if (name == "nelder-mead") {
                    s = nelder_mead(pf, best_grid_start(pf, cfg.baselines.start_grid_n), cfg.baselines.nelder_mead);
                } else if (name == "de") {
                    s = differential_evolution(pf, cfg.baselines.de);
                    row.seed = cfg.baselines.de.seed;
                } else {
                    s = pso(pf, cfg.baselines.pso);
                    row.seed = cfg.baselines.pso.seed;
                }
                row.wall = seconds_since(t0);
                row.x = s.x;
                row.converged = s.converged;
            }
            row.check = verify(p, 0, row.x, tol);
            if (m) row.f_surrogate = m->value(row.x);
        } catch (const Error& e) {
            row.wall = seconds_since(t0);
            row.error = e.what();
        }
        log << name << ": ";
        if (row.error.empty()) {
            log << "f_true " << format_double(row.check.f_true) << (row.check.feasible ? "" : " (infeasible)");
        } else {
            log << "error: " << row.error;
        }
        log << "  [" << row.wall << " s]\n";
        rows.push_back(std::move(row));
    }

    std::vector<std::string> header{"optimizer"};
    for (const auto& c : x_columns(p.dim)) header.push_back(c);
    for (const auto& c : {"f_surrogate", "f_true"}) header.emplace_back(c);
    for (std::size_t k = 0; k < p.constraints.size(); ++k) header.push_back(constraint_label(p, k));
    for (const auto& c : {"max_violation", "feasible", "converged", "seed", "error"}) header.emplace_back(c);
    CsvWriter csv(header);
    json report = report_header(cfg, "compare", &p);
    if (m) report["surrogate"] = {{"model_file", model_path(cfg, p, 0).filename().string()}};
    json timing = {{"format_version", format_version}, {"command", "compare"}, {"problem", p.name}};
    bool all_ok = true;
    for (const auto& r : rows) {
        const bool ok = r.error.empty();
        all_ok = all_ok && ok && r.check.feasible;
        csv.cell(r.optimizer);
        for (std::size_t i = 0; i < p.dim; ++i) ok ? csv.cell(r.x[i]) : csv.empty_cell();
        ok && m ? csv.cell(r.f_surrogate) : csv.empty_cell();
        ok ? csv.cell(r.check.f_true) : csv.empty_cell();
        for (std::size_t k = 0; k < p.constraints.size(); ++k) ok ? csv.cell(r.check.violations[k]) : csv.empty_cell();
        ok ? csv.cell(r.check.max_violation) : csv.empty_cell();
        csv.cell(ok && r.check.feasible).cell(r.converged).cell(static_cast<std::int64_t>(r.seed)).cell(r.error);
        csv.end_row();

        json jr = {{"optimizer", r.optimizer}, {"seed", r.seed}, {"error", r.error}};
        if (ok) {
            jr["x"] = r.x;
            jr["f_surrogate"] = m ? json(r.f_surrogate) : json(nullptr);
            jr["f_true"] = r.check.f_true;
            jr["violations"] = r.check.violations;
            jr["max_violation"] = r.check.max_violation;
            jr["feasible"] = r.check.feasible;
            jr["converged"] = r.converged;
        }
        report["rows"].push_back(jr);
        timing["rows"].push_back({{"optimizer", r.optimizer}, {"wall_time_seconds", r.wall}});
    }
    if (nom_result) {
        json restarts = json::array();
        for (const auto& s : nom_result->restarts) {
            restarts.push_back({{"restart", s.restart_index},
                                {"seed", s.seed},
                                {"x", s.x},
                                {"f_surrogate", s.f_surrogate},
                                {"feasible", s.feasible},
                                {"error", s.error}});
        }
        json minima = json::array();
        for (const auto& s : nom_result->minima) minima.push_back({{"x", s.x}, {"f_surrogate", s.f_surrogate}});
        report["nom"] = {{"restarts", restarts}, {"minima", minima}};

        std::vector<std::string> lh{"epoch"};
        std::size_t epochs = 0;
        for (const auto& s : nom_result->restarts) {
            lh.push_back("restart" + std::to_string(s.restart_index + 1) + "_loss");
            epochs = std::max(epochs, s.loss_history.size());
        }
        CsvWriter loss(lh);
        for (std::size_t e = 0; e < epochs; ++e) {
            loss.cell(e + 1);
            for (const auto& s : nom_result->restarts) {
                e < s.loss_history.size() ? loss.cell(s.loss_history[e]) : loss.empty_cell();
            }
            loss.end_row();
        }
        write_file_atomic(cfg.out / ("compare_" + stem + "_nom_loss.csv"), loss.str());
    }
    report["all_feasible"] = all_ok;
    write_file_atomic(cfg.out / ("compare_" + stem + ".csv"), csv.str());
    write_file_atomic(cfg.out / ("compare_" + stem + ".json"), dump(report));
    write_file_atomic(cfg.out / ("compare_" + stem + ".timing.json"), dump(timing));
    return all_ok ? exit_ok : exit_failed;
}

// ---- moo -------------------------------------------------------------------

int cmd_moo(const RunConfig& cfg, std::ostream& log)
{
    const ProblemSpec p = resolve_problem(cfg, "moo1");
    if (p.objectives.size() != 2) throw ConfigError("moo: problem '" + p.name + "' must have exactly two objectives");
    const std::string stem = file_stem(p);
    MooProblem mp;
    for (std::size_t i = 0; i < 2; ++i) mp.surrogates.push_back(surrogate_for(p, i, cfg, log));
    mp.truths = p.objectives;
    mp.constraints = p.constraints;
    mp.box = p.box;

    const auto t0 = std::chrono::steady_clock::now();
    const SweepResult sweep = sweep_pareto(mp, cfg.moo.n_sweep, cfg.nom);
    const double sweep_wall = seconds_since(t0);
    const auto t1 = std::chrono::steady_clock::now();
    const OracleFront oracle =
        grid_pareto_oracle(*p.objectives[0], *p.objectives[1], p.constraints, p.box, cfg.moo.oracle_resolution);
    const double oracle_wall = seconds_since(t1);

    std::vector<std::string> header = x_columns(p.dim);
    for (const auto& c : {"f1_true", "f2_true", "f1_surr", "f2_surr", "u_bound", "feasible", "on_front", "excess"}) {
        header.emplace_back(c);
    }
    CsvWriter csv(header);
    std::size_t feasible_count = 0;
    double worst = -std::numeric_limits<double>::infinity();
    bool all_feasible = true;
    for (const auto& pt : sweep.sweep) {
        const bool ok = feasible(p, pt.x, cfg.nom.feasibility_tol);
        const double f[2] = {eval_objective(p, 0, pt.x), eval_objective(p, 1, pt.x)};
        const double excess = dominance_excess(f, oracle.f);
        const bool on_front = std::any_of(sweep.front.begin(), sweep.front.end(),
                                          [&](const ParetoPoint& q) { return q.sweep_index == pt.sweep_index; });
        if (ok) {
            ++feasible_count;
            worst = std::max(worst, excess);
        }
        all_feasible = all_feasible && ok;
        for (double v : pt.x) csv.cell(v);
        csv.cell(f[0]).cell(f[1]).cell(pt.f_surrogate[0]).cell(pt.f_surrogate[1]).cell(pt.u_bound);
        csv.cell(ok).cell(on_front).cell(excess);
        csv.end_row();
    }

    std::vector<std::string> oh = x_columns(p.dim);
    oh.emplace_back("f1");
    oh.emplace_back("f2");
    CsvWriter ocsv(oh);
    for (std::size_t i = 0; i < oracle.f.size(); ++i) {
        for (double v : oracle.x.row(i)) ocsv.cell(v);
        ocsv.cell(oracle.f.row(i)[0]).cell(oracle.f.row(i)[1]);
        ocsv.end_row();
    }

    json report = report_header(cfg, "moo", &p);
    const Solution& s2 = sweep.secondary_optimum;
    report["secondary_optimum"] = {{"x", s2.x},
                                   {"f1_surr", mp.surrogates[0]->value(s2.x)},
                                   {"f2_surr", s2.f_surrogate},
                                   {"f1_true", eval_objective(p, 0, s2.x)},
                                   {"f2_true", eval_objective(p, 1, s2.x)}};
    report["u_low"] = sweep.u_low;
    report["u_high"] = sweep.u_high;
    report["n_sweep"] = sweep.sweep.size();
    report["feasible_count"] = feasible_count;
    report["front_size"] = sweep.front.size();
    report["oracle_points"] = oracle.f.size();
    report["oracle_resolution"] = cfg.moo.oracle_resolution;
    report["max_excess"] = feasible_count ? json(worst) : json(nullptr);
    report["excess_tolerance"] = cfg.moo.excess_tolerance;
    report["within_tolerance"] = feasible_count > 0 && worst <= cfg.moo.excess_tolerance;
    report["model_files"] = {model_path(cfg, p, 0).filename().string(), model_path(cfg, p, 1).filename().string()};

    json timing = {{"format_version", format_version},
                   {"command", "moo"},
                   {"problem", p.name},
                   {"sweep_wall_time_seconds", sweep_wall},
                   {"oracle_wall_time_seconds", oracle_wall}};
    write_file_atomic(cfg.out / ("moo_" + stem + "_pareto.csv"), csv.str());
    write_file_atomic(cfg.out / ("moo_" + stem + "_oracle.csv"), ocsv.str());
    write_file_atomic(cfg.out / ("moo_" + stem + ".json"), dump(report));
    write_file_atomic(cfg.out / ("moo_" + stem + ".timing.json"), dump(timing));
    log << p.name << ": " << feasible_count << "/" << sweep.sweep.size() << " sweep points feasible, "
        << sweep.front.size() << " on the front, worst dominance excess "
        << (feasible_count ? format_double(worst) : "n/a") << " (oracle " << oracle.f.size() << " points)\n";
    return all_feasible ? exit_ok : exit_failed;
}

// ---- minima study ----------------------------------------------------------

int cmd_minima_study(const RunConfig& cfg, std::ostream& log)
{
    const ProblemSpec p = resolve_problem(cfg, "discussion");
    const std::string stem = file_stem(p);
    const auto m = surrogate_for(p, 0, cfg, log);
    const std::size_t reps = cfg.minima_study.repetitions;
    const std::size_t multi = cfg.minima_study.starting_points;

    struct Cell {
        WInit w;
        std::size_t starts;
        std::size_t runs;
    };
    const Cell cells[] = {
        {WInit::unit, 1, 1},   {WInit::unit, 1, reps},   {WInit::unit, multi, 1},
        {WInit::random, 1, 1}, {WInit::random, 1, reps}, {WInit::random, multi, 1},
    };

    CsvWriter table({"w_init", "starting_points", "runs", "minima"});
    std::vector<std::string> ph{"w_init", "starting_points", "runs", "minimum"};
    for (const auto& c : x_columns(p.dim)) ph.push_back(c);
    for (const auto& c : {"f_surrogate", "f_true", "known_minimum"}) ph.emplace_back(c);
    CsvWriter points(ph);
    json report = report_header(cfg, "minima-study", &p);
    json timing = {{"format_version", format_version}, {"command", "minima-study"}, {"problem", p.name}};
    const double radius = cfg.nom.dedup_tol * p.box.diagonal();

    for (const Cell& cell : cells) {
        NomConfig nc = cfg.nom;
        nc.w_init = cell.w;
        nc.n_starting_points = cell.starts;
        const auto t0 = std::chrono::steady_clock::now();
        const auto minima = collect_minima(p, m, nc, cell.runs);
        const double wall = seconds_since(t0);
        const std::string w = to_string(cell.w);
        table.cell(w).cell(cell.starts).cell(cell.runs).cell(minima.size());
        table.end_row();
        json jm = json::array();
        for (std::size_t k = 0; k < minima.size(); ++k) {
            const auto& s = minima[k];
            // Index of the recorded minimum within the dedup radius, or -1.
            std::int64_t known = -1;
            for (std::size_t q = 0; q < p.known_minima.size() && known < 0; ++q) {
                double d2 = 0.0;
                for (std::size_t i = 0; i < p.dim; ++i) d2 += std::pow(s.x[i] - p.known_minima[q].x[i], 2);
                if (std::sqrt(d2) <= radius) known = static_cast<std::int64_t>(q) + 1;
            }
            const double ft = eval_objective(p, 0, s.x);
            points.cell(w).cell(cell.starts).cell(cell.runs).cell(k + 1);
            for (double v : s.x) points.cell(v);
            points.cell(s.f_surrogate).cell(ft).cell(known);
            points.end_row();
            jm.push_back({{"x", s.x}, {"f_surrogate", s.f_surrogate}, {"f_true", ft}, {"known_minimum", known}});
        }
        report["cells"].push_back({{"w_init", w},
                                   {"starting_points", cell.starts},
                                   {"runs", cell.runs},
                                   {"minima_count", minima.size()},
                                   {"minima", jm}});
        timing["cells"].push_back(
            {{"w_init", w}, {"starting_points", cell.starts}, {"runs", cell.runs}, {"wall_time_seconds", wall}});
        log << w << " w, " << cell.starts << " start(s), " << cell.runs << " run(s): " << minima.size()
            << " minima\n";
    }
    json known = json::array();
    for (const auto& k : p.known_minima) known.push_back({{"x", k.x}, {"f", k.f}});
    report["known_minima"] = known;
    report["dedup_radius"] = radius;
    write_file_atomic(cfg.out / ("minima_study_" + stem + ".csv"), table.str());
    write_file_atomic(cfg.out / ("minima_study_" + stem + "_points.csv"), points.str());
    write_file_atomic(cfg.out / ("minima_study_" + stem + ".json"), dump(report));
    write_file_atomic(cfg.out / ("minima_study_" + stem + ".timing.json"), dump(timing));
    return exit_ok;
}

// ---- gradcheck -------------------------------------------------------------

int cmd_gradcheck(const RunConfig& cfg, std::ostream& log)
{
    const auto results = run_gradcheck(cfg.gradcheck.suites, cfg.gradcheck.options);
    CsvWriter csv({"suite", "item", "checks", "max_rel_error", "passed"});
    json report = report_header(cfg, "gradcheck", nullptr);
    bool all = true;
    double worst = 0.0;
    for (const auto& r : results) {
        all = all && r.passed;
        worst = std::max(worst, r.max_rel_error);
        csv.cell(r.suite).cell(r.item).cell(r.checks).cell(r.max_rel_error).cell(r.passed);
        csv.end_row();
        report["results"].push_back({{"suite", r.suite},
                                     {"item", r.item},
                                     {"checks", r.checks},
                                     {"max_rel_error", r.max_rel_error},
                                     {"passed", r.passed}});
        log << (r.passed ? "PASS " : "FAIL ") << r.suite << "/" << r.item << "  checks " << r.checks
            << "  max rel error " << format_double(r.max_rel_error) << "\n";
    }
    report["max_rel_error"] = worst;
    report["passed"] = all;
    write_file_atomic(cfg.out / "gradcheck.csv", csv.str());
    write_file_atomic(cfg.out / "gradcheck.json", dump(report));
    log << (all ? "all gradient checks passed" : "gradient check FAILED") << ", max rel error "
        << format_double(worst) << "\n";
    return all ? exit_ok : exit_failed;
}

// ---- entry point -----------------------------------------------------------

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Constrained optimization of neural-network surrogates by training their inputs", "nom"};
    app.require_subcommand(1, 1);
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir, problem, config;
    app.add_option("--seed", seed, "Seed for every stochastic component");
    app.add_option("--out", out_dir, "Output directory (default: out)");
    app.add_option("--problem", problem, "Registered problem name or problem file");
    app.add_option("--config", config, "JSON config file");

    auto* fit = app.add_subcommand("fit", "Fit and save surrogates for every objective")->fallthrough();
    auto* compare = app.add_subcommand("compare", "NOM against Nelder-Mead, DE and PSO")->fallthrough();
    std::vector<std::string> optimizers;
    compare->add_option("--optimizers", optimizers, "Subset of nom, nelder-mead, de, pso")->delimiter(',');
    auto* moo = app.add_subcommand("moo", "Bounded-objective Pareto sweep against a grid oracle")->fallthrough();
    std::optional<std::size_t> n_sweep;
    moo->add_option("--n-sweep", n_sweep, "Number of bound values");
    auto* study = app.add_subcommand("minima-study", "Local minima found per w-init / start-count cell")
                      ->fallthrough();
    std::optional<std::size_t> repetitions;
    study->add_option("--repetitions", repetitions, "Runs in the repeated single-start cells");
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks of every analytic gradient")
                     ->fallthrough();
    std::vector<std::string> suites;
    std::optional<std::size_t> gc_count;
    std::optional<std::string> fault;
    grad->add_option("--suites", suites, "Subset of activations, network, expression, surrogate, nom")
        ->delimiter(',');
    grad->add_option("--count", gc_count, "Random cases per suite");
    grad->add_option("--inject-fault", fault, "Break one activation's derivative (self-test)")->group("");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    RunConfig cfg;
    std::optional<ActivationKind> fault_kind;
    try {
        if (fault) fault_kind = activation_kind_from_string(*fault);
        if (config) cfg = load_config_file(*config);
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.out = *out_dir;
        if (problem) {
            cfg.problem = *problem;
            cfg.inline_problem.reset();
        }
        if (!optimizers.empty()) cfg.compare.optimizers = optimizers;
        if (n_sweep) cfg.moo.n_sweep = *n_sweep;
        if (repetitions) cfg.minima_study.repetitions = *repetitions;
        if (!suites.empty()) cfg.gradcheck.suites = suites;
        if (gc_count) cfg.gradcheck.options.count = *gc_count;
        cfg.finalize();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }

    try {
        if (fit->parsed()) return cmd_fit(cfg, out);
        if (compare->parsed()) return cmd_compare(cfg, out);
        if (moo->parsed()) return cmd_moo(cfg, out);
        if (study->parsed()) return cmd_minima_study(cfg, out);
        if (fault_kind) testing::inject_derivative_fault(*fault_kind);
        const int code = cmd_gradcheck(cfg, out);
        testing::clear_derivative_fault();
        return code;
    } catch (const ConfigError& e) {
        testing::clear_derivative_fault();
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        testing::clear_derivative_fault();
        err << "error: " << e.what() << "\n";
        return exit_failed;
    }
}

} // namespace nom::cli
