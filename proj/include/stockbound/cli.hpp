#pragma once

// Command-line front end: policy tables, figure data, simulation checks and
// CGF estimation from demand files. Every command writes CSV (or a key: value
// report for validate) and is deterministic for a fixed configuration and seed.

#include "stockbound/demand_models.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace stockbound::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBoundFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Bad flags, bad config file contents or out-of-range parameters.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    /// Full model description from a config file; overrides model_name/sigma/rho.
    std::optional<DemandModel> model;
    std::string model_name = "gauss2";  ///< gauss1 | gauss2
    double sigma = 1.0;                 ///< per-commodity standard deviation
    double rho = 0.9;
    int lead_time = 10;
    std::optional<double> delta;
    std::optional<std::size_t> grid;    ///< number of log-spaced deltas in [1e-3, 0.5]
    std::optional<std::uint64_t> seed;
    std::size_t trials = 1'000'000;
    std::string out;                    ///< empty means stdout

    /// Keys: model (name or object), sigma, rho, L, delta, grid, seed, trials, out.
    /// Unknown keys are rejected.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

    /// Throws UsageError on out-of-range values.
    void validate() const;

    DemandModel demand_model() const;
    std::vector<double> deltas() const;
    std::uint64_t require_seed(const char* why) const;
};

struct ValidationReport {
    std::string pattern;
    int lead_time = 0;
    double delta = 0.0;
    double safety_stock = 0.0;
    bool forced = false;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    std::size_t stockouts = 0;
    double empirical_rate = 0.0;
    double sigma = 0.0;      ///< sqrt(delta (1 - delta) / trials)
    double threshold = 0.0;  ///< delta + 3 sigma
    bool pass = false;
};

/// Simulates lead-time demand and counts stockouts at the proposed safety stock
/// (equal margins, or the pooled margin when fungible), or at forced_stock.
ValidationReport validate_bound(const GaussianModel& model, LeadTime lead_time, double delta,
                                std::size_t trials, std::uint64_t seed, bool fungible,
                                std::optional<double> forced_stock = std::nullopt);

void write_report(std::ostream& out, const ValidationReport& report);

inline constexpr std::array<std::size_t, 4> kFigestSizes{100, 1'000, 10'000, 100'000};

struct FigestRow {
    double u = 0.0;
    std::array<double, kFigestSizes.size()> error{};  ///< median |phi_hat - u^2/2| per sample size
};

/// Sample-CGF error for standard normal demand with L = 1, median over replicates.
std::vector<FigestRow> figest_errors(std::span<const double> u_grid, std::size_t replicates,
                                     std::uint64_t seed);

/// Entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stockbound::cli
