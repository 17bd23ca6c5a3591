#include "stockbound/cli.hpp"

#include "stockbound/cgf.hpp"
#include "stockbound/policy.hpp"
#include "stockbound/random.hpp"
#include "stockbound/rate_function.hpp"
#include "stockbound/stockout_oracle.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>

namespace stockbound::cli {

namespace {

constexpr double kGridLow = 1e-3;
constexpr double kGridHigh = 0.5;
constexpr std::size_t kMinTrials = 10'000;

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// Writes to --out when given, otherwise to the caller's stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
        if (path.empty()) return;
        file_.open(path);
        if (!file_) throw UsageError("cannot open output file '" + path + "'");
        stream_ = &file_;
    }
    std::ostream& operator*() { return *stream_; }

private:
    std::ofstream file_;
    std::ostream* stream_;
};

GaussianModel require_gaussian(const DemandModel& model, const char* command) {
    if (const auto* g = std::get_if<GaussianModel>(&model)) return *g;
    throw UsageError(std::string(command) + " needs a gaussian model");
}

bool equal_diagonal(const GaussianModel& model) {
    const auto d = model.covariance().diagonal();
    return (d.array() == d[0]).all();
}

// Centered lead-time totals (or per-replicate minima across commodities) in
// descending order; exceedance frequencies and empirical quantiles come from here.
class SampleTail {
public:
    explicit SampleTail(std::vector<double> values) : values_(std::move(values)) {
        std::sort(values_.begin(), values_.end(), std::greater<>());
    }

    double frequency(double stock) const {
        const auto it = std::partition_point(values_.begin(), values_.end(),
                                             [stock](double v) { return v >= stock; });
        return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
    }

    JointTailInversion quantile(double delta) const {
        const double p0 = frequency(0.0);
        if (delta >= p0) return {0.0, p0, true};
        const auto k = static_cast<std::size_t>(std::floor(delta * static_cast<double>(values_.size())));
        const double stock = std::nextafter(values_[k], std::numeric_limits<double>::infinity());
        return {stock, frequency(stock), false};
    }

    double stddev() const {
        const double n = static_cast<double>(values_.size());
        const double mean = std::accumulate(values_.begin(), values_.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : values_) ss += (v - mean) * (v - mean);
        return std::sqrt(ss / (n - 1.0));
    }

private:
    std::vector<double> values_;
};

void write_rows(std::ostream& out, const std::vector<ComparisonRow>& rows) {
    out << "delta,ss_pre,ss_pro,ss_rig,p_pre,p_pro,p_rig,ratio_pro_rig,ratio_pre_rig\n";
    for (const auto& r : rows)
        out << num(r.delta) << ',' << num(r.ss_pre) << ',' << num(r.ss_pro) << ','
            << num(r.ss_rig) << ',' << num(r.p_pre) << ',' << num(r.p_pro) << ','
            << num(r.p_rig) << ',' << num(r.ratio_pro()) << ',' << num(r.ratio_pre()) << '\n';
}

// Policy rows when no exact oracle applies: the rigorous column and all
// probabilities come from simulated (or recorded) lead-time totals.
std::vector<ComparisonRow> sample_based_rows(const RunConfig& cfg, const DemandModel& model) {
    std::vector<double> samples;
    std::function<double(double)> ss_pre;
    std::function<double(double)> ss_pro;

    if (const auto* g = std::get_if<GaussianModel>(&model)) {
        if (!equal_diagonal(*g))
            throw UsageError("compute uses equal margins and needs equal variances");
        const std::uint64_t seed = cfg.require_seed("monte carlo oracle");
        const LeadTime lt(cfg.lead_time);
        const Eigen::MatrixXd totals = simulate_lead_time_totals(*g, lt, cfg.trials, seed);
        const Eigen::RowVectorXd center = lt.value() * g->mean().transpose();
        samples.resize(cfg.trials);
        for (Eigen::Index r = 0; r < totals.rows(); ++r)
            samples[static_cast<std::size_t>(r)] = (totals.row(r) - center).minCoeff();
        ss_pre = [g, lt](double d) { return ss_previous(*g, lt, d)[0]; };
        ss_pro = [g, lt](double d) { return ss_proposed(*g, lt, d).safety_stock[0]; };
    } else if (const auto* w = std::get_if<WeibullModel>(&model)) {
        const std::uint64_t seed = cfg.require_seed("monte carlo oracle");
        const auto periods = static_cast<std::size_t>(cfg.lead_time);
        const std::vector<double> draws = sample_weibull(*w, cfg.trials * periods, seed);
        const double center = static_cast<double>(periods) * w->mean();
        samples.resize(cfg.trials);
        for (std::size_t r = 0; r < cfg.trials; ++r)
            samples[r] = std::accumulate(draws.begin() + static_cast<std::ptrdiff_t>(r * periods),
                                         draws.begin() + static_cast<std::ptrdiff_t>((r + 1) * periods), 0.0) -
                         center;
        const LeadTime lt(cfg.lead_time);
        const double sd = std::sqrt(lt.value() * w->variance());
        const CgfEvaluator cgf = CgfEvaluator::weibull(*w);
        ss_pre = [sd](double d) { return sd * normal_tail_inverse(d); };
        ss_pro = [cgf, lt](double d) { return ss_proposed(cgf, lt, d); };
    } else {
        const auto& data = std::get<EmpiricalDemand>(model);
        if (data.replicates() < 2) throw UsageError("empirical model needs at least two rows");
        samples = data.row_sums();
        const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) /
                            static_cast<double>(samples.size());
        for (double& s : samples) s -= mean;
        const LeadTime lt(static_cast<int>(data.periods()));
        const CgfEvaluator cgf = CgfEvaluator::empirical(data);
        const double sd = SampleTail(samples).stddev();
        ss_pre = [sd](double d) { return sd * normal_tail_inverse(d); };
        ss_pro = [cgf, lt](double d) { return ss_proposed(cgf, lt, d); };
    }

    const SampleTail tail(std::move(samples));
    std::vector<ComparisonRow> rows;
    for (double delta : cfg.deltas()) {
        ComparisonRow row;
        row.delta = delta;
        row.ss_pre = ss_pre(delta);
        row.ss_pro = ss_pro(delta);
        const JointTailInversion rig = tail.quantile(delta);
        row.ss_rig = rig.safety_stock;
        row.p_pre = tail.frequency(row.ss_pre);
        row.p_pro = tail.frequency(row.ss_pro);
        row.p_rig = rig.probability;
        rows.push_back(row);
    }
    return rows;
}

int cmd_compute(const RunConfig& cfg, std::ostream& out) {
    if (!cfg.delta && !cfg.grid) throw CLI::RequiredError("--delta (or --grid)");
    const DemandModel model = cfg.demand_model();
    std::vector<ComparisonRow> rows;
    const auto* g = std::get_if<GaussianModel>(&model);
    if (g && g->dimension() <= 2 && equal_diagonal(*g)) {
        const std::vector<double> deltas = cfg.deltas();
        rows = compare_policies(*g, LeadTime(cfg.lead_time), deltas);
    } else {
        rows = sample_based_rows(cfg, model);
    }
    Sink sink(cfg.out, out);
    write_rows(*sink, rows);
    return kExitOk;
}

int cmd_figure(const RunConfig& cfg, const std::string& which, std::size_t replicates,
               std::size_t u_points, std::ostream& out) {
    if (which == "figest") {
        if (u_points < 2) throw UsageError("--points must be at least 2");
        if (replicates < 1) throw UsageError("--replicates must be at least 1");
        const std::uint64_t seed = cfg.require_seed("figest");
        std::vector<double> u(u_points);
        for (std::size_t k = 0; k < u_points; ++k)
            u[k] = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(u_points - 1);
        const auto table = figest_errors(u, replicates, seed);
        Sink sink(cfg.out, out);
        *sink << "u";
        for (std::size_t m : kFigestSizes) *sink << ",err_m" << m;
        *sink << '\n';
        for (const auto& row : table) {
            *sink << num(row.u);
            for (double e : row.error) *sink << ',' << num(e);
            *sink << '\n';
        }
        return kExitOk;
    }

    RunConfig grid_cfg = cfg;
    if (!grid_cfg.grid) grid_cfg.grid = 40;
    grid_cfg.delta.reset();
    const GaussianModel model = require_gaussian(cfg.demand_model(), "figure");
    const std::vector<double> deltas = grid_cfg.deltas();
    const auto rows = compare_policies(model, LeadTime(cfg.lead_time), deltas);
    Sink sink(cfg.out, out);
    if (which == "fig1") {
        *sink << "delta,ratio_pro,ratio_pre\n";
        for (const auto& r : rows)
            *sink << num(r.delta) << ',' << num(r.ratio_pro()) << ',' << num(r.ratio_pre()) << '\n';
    } else {
        *sink << "delta,p_pro_over_delta,p_pre_over_delta\n";
        for (const auto& r : rows)
            *sink << num(r.delta) << ',' << num(r.p_pro / r.delta) << ',' << num(r.p_pre / r.delta) << '\n';
    }
    return kExitOk;
}

int cmd_validate(const RunConfig& cfg, const std::string& pattern, std::optional<double> forced,
                 std::ostream& out) {
    const GaussianModel model = require_gaussian(cfg.demand_model(), "validate");
    const double delta = cfg.delta.value_or(0.05);
    if (cfg.grid) throw UsageError("validate takes a single --delta");
    if (!(delta > 0.0 && delta < 1.0)) throw UsageError("delta must lie in (0, 1)");
    const std::uint64_t seed = cfg.require_seed("validate");
    const ValidationReport report = validate_bound(model, LeadTime(cfg.lead_time), delta, cfg.trials,
                                                   seed, pattern == "fungible", forced);
    Sink sink(cfg.out, out);
    write_report(*sink, report);
    return report.pass ? kExitOk : kExitBoundFailed;
}

int cmd_estimate(const std::string& path, bool header, double u_min, double u_max, std::size_t points,
                 double multiplier, double window, const std::string& out_path, std::ostream& out) {
    if (points < 1) throw UsageError("--points must be at least 1");
    if (!(u_min <= u_max)) throw UsageError("--u-min must not exceed --u-max");
    if (std::max(std::abs(u_min), std::abs(u_max)) > window)
        throw UsageError("u grid leaves the estimation window");
    const EmpiricalDemand data = load_demand_csv(path, header);
    if (data.replicates() < 2) throw UsageError("need at least two demand rows");

    Sink sink(out_path, out);
    *sink << "u,phi_hat,mgf_hat,mgf_sd,half_width,mgf_lower,mgf_upper,failure_probability\n";
    for (std::size_t k = 0; k < points; ++k) {
        const double u = points == 1 ? u_min
                                     : u_min + (u_max - u_min) * static_cast<double>(k) /
                                                   static_cast<double>(points - 1);
        const EstimationCertificate c = estimation_certificate(data, u, multiplier);
        *sink << num(u) << ',' << num(cgf_empirical(data, u, window)) << ',' << num(c.mgf_estimate) << ','
              << num(c.mgf_std) << ',' << num(c.half_width) << ','
              << num(c.mgf_estimate - c.half_width) << ',' << num(c.mgf_estimate + c.half_width) << ','
              << (c.failure_probability ? num(*c.failure_probability) : std::string{}) << '\n';
    }
    return kExitOk;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class T>
void take(const CLI::Option* opt, T& field, const T& value) {
    if (opt->count() > 0) field = value;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    static const std::vector<std::string> keys{"model", "sigma", "rho",   "L",  "delta",
                                               "grid",  "seed",  "trials", "out"};
    for (const auto& [key, _] : j.items())
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw UsageError("unknown config key '" + key + "'");

    RunConfig c;
    try {
        if (j.contains("model")) {
            const auto& m = j.at("model");
            if (m.is_string()) c.model_name = m.get<std::string>();
            else c.model = model_from_json(m, base_dir);
        }
        if (j.contains("sigma")) c.sigma = j.at("sigma").get<double>();
        if (j.contains("rho")) c.rho = j.at("rho").get<double>();
        if (j.contains("L")) c.lead_time = j.at("L").get<int>();
        if (j.contains("delta")) c.delta = j.at("delta").get<double>();
        if (j.contains("grid")) c.grid = j.at("grid").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("trials")) c.trials = j.at("trials").get<std::size_t>();
        if (j.contains("out")) c.out = j.at("out").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    return c;
}

void RunConfig::validate() const {
    if (!model && model_name != "gauss1" && model_name != "gauss2")
        throw UsageError("model must be gauss1 or gauss2");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw UsageError("sigma must be positive");
    if (!(std::abs(rho) <= 1.0)) throw UsageError("rho must lie in [-1, 1]");
    if (lead_time < 1) throw UsageError("L must be at least 1");
    if (delta && !(*delta > 0.0 && *delta < 1.0)) throw UsageError("delta must lie in (0, 1)");
    if (delta && grid) throw UsageError("give either --delta or --grid, not both");
    if (grid && *grid < 1) throw UsageError("grid must have at least one point");
    if (trials < kMinTrials) throw UsageError("trials must be at least 10000");
}

DemandModel RunConfig::demand_model() const {
    if (model) return *model;
    const double var = sigma * sigma;
    if (model_name == "gauss1") return GaussianModel::univariate(var);
    return GaussianModel::bivariate(var, var, rho);
}

std::vector<double> RunConfig::deltas() const {
    if (delta) return {*delta};
    return log_spaced(kGridLow, kGridHigh, grid.value_or(40));
}

std::uint64_t RunConfig::require_seed(const char* why) const {
    if (!seed) throw UsageError(std::string(why) + " needs --seed (or STOCKBOUND_SEED)");
    return *seed;
}

ValidationReport validate_bound(const GaussianModel& model, LeadTime lead_time, double delta,
                                std::size_t trials, std::uint64_t seed, bool fungible,
                                std::optional<double> forced_stock) {
    if (trials < kMinTrials) throw ModelError("validation needs at least 1e4 trials");
    ValidationReport r;
    r.pattern = fungible ? "fungible" : "all-exceed";
    r.lead_time = lead_time.periods();
    r.delta = delta;
    r.trials = trials;
    r.seed = seed;
    r.forced = forced_stock.has_value();
    if (forced_stock) r.safety_stock = *forced_stock;
    else if (fungible) r.safety_stock = ss_fungible(model, lead_time, delta);
    else r.safety_stock = ss_proposed(model, lead_time, delta).safety_stock[0];

    const Eigen::MatrixXd totals = simulate_lead_time_totals(model, lead_time, trials, seed);
    const Eigen::RowVectorXd center = lead_time.value() * model.mean().transpose();
    for (Eigen::Index k = 0; k < totals.rows(); ++k) {
        const Eigen::RowVectorXd x = totals.row(k) - center;
        const bool event = fungible ? x.sum() >= r.safety_stock : x.minCoeff() >= r.safety_stock;
        r.stockouts += event ? 1 : 0;
    }
    const double n = static_cast<double>(trials);
    r.empirical_rate = static_cast<double>(r.stockouts) / n;
    r.sigma = std::sqrt(delta * (1.0 - delta) / n);
    r.threshold = delta + 3.0 * r.sigma;
    r.pass = r.empirical_rate <= r.threshold;
    return r;
}

void write_report(std::ostream& out, const ValidationReport& r) {
    out << "pattern: " << r.pattern << '\n'
        << "lead_time: " << r.lead_time << '\n'
        << "delta: " << num(r.delta) << '\n'
        << "safety_stock: " << num(r.safety_stock) << (r.forced ? " (forced)" : "") << '\n'
        << "trials: " << r.trials << '\n'
        << "seed: " << r.seed << '\n'
        << "stockouts: " << r.stockouts << '\n'
        << "empirical_rate: " << num(r.empirical_rate) << '\n'
        << "threshold: " << num(r.threshold) << '\n'
        << "result: " << (r.pass ? "pass" : "fail") << '\n';
}

std::vector<FigestRow> figest_errors(std::span<const double> u_grid, std::size_t replicates,
                                     std::uint64_t seed) {
    const GaussianModel standard = GaussianModel::univariate(1.0);
    std::vector<FigestRow> rows(u_grid.size());
    for (std::size_t k = 0; k < u_grid.size(); ++k) rows[k].u = u_grid[k];

    for (std::size_t m = 0; m < kFigestSizes.size(); ++m) {
        const std::size_t size = kFigestSizes[m];
        std::vector<std::vector<double>> errors(u_grid.size());
        for (std::size_t rep = 0; rep < replicates; ++rep) {
            const std::uint64_t stream_seed = derive_seed(derive_seed(seed, rep), size);
            const Eigen::MatrixXd draws = simulate_lead_time_totals(standard, LeadTime(1), size, stream_seed);
            const EmpiricalDemand data(std::vector<double>(draws.data(), draws.data() + draws.size()), size, 1);
            for (std::size_t k = 0; k < u_grid.size(); ++k) {
                const double u = u_grid[k];
                errors[k].push_back(std::abs(cgf_empirical(data, u, std::max(5.0, std::abs(u))) - 0.5 * u * u));
            }
        }
        for (std::size_t k = 0; k < u_grid.size(); ++k) rows[k].error[m] = median(std::move(errors[k]));
    }
    return rows;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Chernoff-certified safety stocks for correlated demand", "stockbound"};
    app.require_subcommand(1);

    std::string config_path;
    std::string model_name;
    double sigma = 0.0;
    double rho = 0.0;
    int lead_time = 0;
    double delta = 0.0;
    std::size_t grid = 0;
    std::uint64_t seed = 0;
    std::size_t trials = 0;
    std::string out_path;

    struct Common {
        CLI::Option *config, *model, *sigma, *rho, *lead_time, *delta, *grid, *seed, *trials, *out;
    };
    auto add_common = [&](CLI::App* sub) {
        Common c{};
        c.config = sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        c.model = sub->add_option("--model", model_name, "gauss1 or gauss2")
                      ->check(CLI::IsMember({"gauss1", "gauss2"}));
        c.sigma = sub->add_option("--sigma", sigma, "per-commodity standard deviation (default 1)");
        c.rho = sub->add_option("--rho", rho, "correlation (default 0.9)");
        c.lead_time = sub->add_option("--L", lead_time, "lead time in periods (default 10)");
        c.delta = sub->add_option("--delta", delta, "allowable stockout rate");
        c.grid = sub->add_option("--grid", grid, "number of log-spaced deltas in [1e-3, 0.5]");
        c.seed = sub->add_option("--seed", seed, "random seed")->envname("STOCKBOUND_SEED");
        c.trials = sub->add_option("--trials", trials, "Monte Carlo trials (default 1e6)");
        c.out = sub->add_option("--out", out_path, "output file (default stdout)");
        return c;
    };

    CLI::App* compute = app.add_subcommand("compute", "previous / proposed / rigorous safety stocks");
    const Common compute_opts = add_common(compute);

    CLI::App* figure = app.add_subcommand("figure", "curve data for the comparison figures");
    std::string which;
    std::size_t replicates = 20;
    std::size_t u_points = 21;
    figure->add_option("which", which, "fig1, fig2 or figest")
        ->required()
        ->check(CLI::IsMember({"fig1", "fig2", "figest"}));
    figure->add_option("--replicates", replicates, "figest: seeds per sample size");
    figure->add_option("--points", u_points, "figest: u grid points on [-1, 1]");
    const Common figure_opts = add_common(figure);

    CLI::App* validate = app.add_subcommand("validate", "simulate stockouts at the proposed safety stock");
    std::string pattern = "all-exceed";
    double forced = 0.0;
    validate->add_option("--pattern", pattern, "all-exceed or fungible")
        ->check(CLI::IsMember({"all-exceed", "fungible"}));
    CLI::Option* forced_opt = validate->add_option("--ss", forced, "test this safety stock instead");
    const Common validate_opts = add_common(validate);

    CLI::App* estimate = app.add_subcommand("estimate-cgf", "sample CGF with a Chebyshev certificate");
    std::string data_path;
    bool header = false;
    double u_min = -1.0;
    double u_max = 1.0;
    std::size_t points = 21;
    double multiplier = 10.0;
    double window = 5.0;
    std::string estimate_out;
    estimate->add_option("--data", data_path, "CSV, one replicate per row")->required()->check(CLI::ExistingFile);
    estimate->add_flag("--header", header, "skip the first row");
    estimate->add_option("--u-min", u_min, "lower end of the u grid (default -1)");
    estimate->add_option("--u-max", u_max, "upper end of the u grid (default 1)");
    estimate->add_option("--points", points, "u grid points (default 21)");
    estimate->add_option("--C", multiplier, "Chebyshev multiplier");
    estimate->add_option("--window", window, "largest |u| evaluated");
    estimate->add_option("--out", estimate_out, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    auto resolve = [&](const Common& c) {
        RunConfig cfg;
        if (c.config->count() > 0) {
            std::ifstream in(config_path);
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw UsageError(std::string("config: ") + e.what());
            }
            cfg = RunConfig::from_json(j, std::filesystem::path(config_path).parent_path());
        }
        if (c.model->count() > 0) {
            cfg.model.reset();
            cfg.model_name = model_name;
        }
        take(c.sigma, cfg.sigma, sigma);
        take(c.rho, cfg.rho, rho);
        take(c.lead_time, cfg.lead_time, lead_time);
        if (c.delta->count() > 0) cfg.delta = delta;
        if (c.grid->count() > 0) cfg.grid = grid;
        if (c.seed->count() > 0) cfg.seed = seed;
        take(c.trials, cfg.trials, trials);
        take(c.out, cfg.out, out_path);
        cfg.validate();
        return cfg;
    };

    try {
        if (compute->parsed()) return cmd_compute(resolve(compute_opts), out);
        if (figure->parsed()) return cmd_figure(resolve(figure_opts), which, replicates, u_points, out);
        if (validate->parsed()) {
            std::optional<double> ss;
            if (forced_opt->count() > 0) ss = forced;
            return cmd_validate(resolve(validate_opts), pattern, ss, out);
        }
        return cmd_estimate(data_path, header, u_min, u_max, points, multiplier, window, estimate_out, out);
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace stockbound::cli
