#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "catdp/categorical_operator.hpp"
#include "catdp/mc_oracle.hpp"
#include "catdp/metrics.hpp"
#include "catdp/mrp.hpp"
#include "catdp/quantile.hpp"
#include "catdp/rng.hpp"

namespace catdp {

enum class Algo { dcfp, d_dcfp, cdp, d_cdp, qdp };
enum class SupportMode { global, env_specific };

inline std::string algo_name(Algo a) {
    switch (a) {
        case Algo::dcfp: return "dcfp";
        case Algo::d_dcfp: return "d-dcfp";
        case Algo::cdp: return "cdp";
        case Algo::d_cdp: return "d-cdp";
        case Algo::qdp: return "qdp";
    }
    return "?";
}

inline Algo parse_algo(const std::string& s) {
    if (s == "dcfp") return Algo::dcfp;
    if (s == "d-dcfp") return Algo::d_dcfp;
    if (s == "cdp") return Algo::cdp;
    if (s == "d-cdp") return Algo::d_cdp;
    if (s == "qdp") return Algo::qdp;
    throw std::invalid_argument("unknown algorithm: " + s);
}

inline std::string support_name(SupportMode s) {
    return s == SupportMode::global ? "global" : "env";
}

inline SupportMode parse_support(const std::string& s) {
    if (s == "global") return SupportMode::global;
    if (s == "env") return SupportMode::env_specific;
    throw std::invalid_argument("unknown support mode: " + s);
}

/// Fixed seed for the Dirichlet benchmark environments so every sweep cell
/// sees the same MRP.
inline constexpr std::uint64_t kDefaultEnvSeed = 2718281828ull;

struct ExperimentConfig {
    std::string env{"two_state"};  // name or file path
    std::vector<double> gammas{0.9};
    std::vector<int> ms{100};
    std::vector<std::uint64_t> ns{1000000};  // samples per state; 0 = exact model
    std::vector<Algo> algos{Algo::dcfp};
    SupportMode support_mode{SupportMode::global};
    int reps{30};
    std::uint64_t seed{1};
    double mc_eps{1e-4};
    std::size_t mc_samples{10000};
    int cdp_max_iters{30000};
    std::string out_path;
    int threads{1};
    std::uint64_t env_seed{kDefaultEnvSeed};
    std::string mc_cache_dir;

    void validate() const {
        if (reps < 1) throw std::invalid_argument("config: reps < 1");
        if (algos.empty()) throw std::invalid_argument("config: no algorithms selected");
        for (const double g : gammas)
            if (g < 0.0 || g >= 1.0) throw std::invalid_argument("config: gamma outside [0,1)");
        for (const int m : ms)
            if (m < 2) throw std::invalid_argument("config: m < 2");
    }
};

/// Named benchmark environment or an environment file (anything that exists
/// on disk is treated as a file; the sweep discount overrides the file's).
inline Mrp make_environment(const std::string& name_or_path, double gamma,
                            std::uint64_t env_seed = kDefaultEnvSeed) {
    if (name_or_path == "chain") return build_chain(gamma);
    if (name_or_path == "two_state") return build_two_state(gamma);
    if (name_or_path == "low_random") return build_random_dirichlet(5, 0.01, env_seed, gamma);
    if (name_or_path == "high_random") return build_random_dirichlet(5, 10.0, env_seed, gamma);
    if (std::filesystem::exists(name_or_path)) return load_mrp(name_or_path).with_gamma(gamma);
    throw std::invalid_argument("unknown environment: " + name_or_path);
}

inline SupportGrid support_for(const Mrp& mrp, int m, SupportMode mode) {
    if (mode == SupportMode::global) return make_grid(m, mrp.gamma);
    const auto [lo, hi] = mrp.return_range();
    if (!(lo < hi)) return make_grid(m, mrp.gamma);  // constant-reward corner case
    return make_grid_ranged(m, lo, hi);
}

struct ResultRow {
    std::string env;
    double gamma{};
    int m{};
    std::uint64_t n{};
    int rep{};
    std::string algo;
    std::string support;
    int iterations{};
    double wallclock_ms{};
    double sup_w1{};
    double sup_cramer{};
    std::optional<double> residual;
    double build_ms{};  // operator construction, reported separately from the CSV
};

inline void write_result_csv_header(std::ostream& out) {
    out << "env,gamma,m,n,rep,algo,support,iterations,wallclock_ms,sup_w1,sup_cramer,residual\n";
}

inline void write_result_row(const ResultRow& r, std::ostream& out) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%d,%llu,%d,%s,%s,%d,%.6g,%.10g,%.10g,", r.env.c_str(),
                  r.gamma, r.m, static_cast<unsigned long long>(r.n), r.rep, r.algo.c_str(),
                  r.support.c_str(), r.iterations, r.wallclock_ms, r.sup_w1, r.sup_cramer);
    out << buf;
    if (r.residual) {
        std::snprintf(buf, sizeof(buf), "%.6g", *r.residual);
        out << buf;
    }
    out << '\n';
}

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string sanitize_key(std::string s) {
    for (auto& c : s)
        if (c == '/' || c == '\\' || c == '.') c = '_';
    return s;
}

inline std::vector<DiscreteDistribution> oracle_distributions(const Mrp& mrp,
                                                              const ExperimentConfig& config,
                                                              std::uint64_t mc_seed) {
    if (!config.mc_cache_dir.empty()) {
        char tag[160];
        std::snprintf(tag, sizeof(tag), "mc_%s_g%.10g_e%.10g_n%zu_s%llu.csv",
                      sanitize_key(config.env).c_str(), mrp.gamma, config.mc_eps, config.mc_samples,
                      static_cast<unsigned long long>(mc_seed));
        const auto path = std::filesystem::path(config.mc_cache_dir) / tag;
        if (std::filesystem::exists(path)) {
            std::ifstream in(path);
            return empirical_distributions(read_return_samples_csv(in));
        }
        const auto rs = mc_returns(mrp, config.mc_eps, config.mc_samples, mc_seed,
                                   std::max(config.threads, 1));
        std::filesystem::create_directories(config.mc_cache_dir);
        std::ofstream out(path);
        write_csv(rs, out);
        return empirical_distributions(rs);
    }
    return empirical_distributions(
        mc_returns(mrp, config.mc_eps, config.mc_samples, mc_seed, std::max(config.threads, 1)));
}

}  // namespace detail

/// Runs the full (gamma x m x n x rep) sweep. Every algorithm in a rep runs
/// on the same dataset (paired comparison); the MC oracle is computed once
/// per gamma; rows stream to `csv` in deterministic task order as they
/// complete. Wallclock covers the solve only; operator construction is
/// reported in ResultRow::build_ms.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& config,
                                             std::ostream* csv = nullptr) {
    config.validate();

    std::vector<Mrp> envs;
    std::vector<std::vector<DiscreteDistribution>> oracles;
    for (std::size_t gi = 0; gi < config.gammas.size(); ++gi) {
        envs.push_back(make_environment(config.env, config.gammas[gi], config.env_seed));
        oracles.push_back(detail::oracle_distributions(
            envs.back(), config, fold_in(fold_in(config.seed, 0x6d63ull), gi)));
    }

    struct Task {
        std::size_t gi, mi, ni;
        int rep;
    };
    std::vector<Task> tasks;
    for (std::size_t gi = 0; gi < config.gammas.size(); ++gi)
        for (std::size_t mi = 0; mi < config.ms.size(); ++mi)
            for (std::size_t ni = 0; ni < config.ns.size(); ++ni)
                for (int rep = 0; rep < config.reps; ++rep) tasks.push_back({gi, mi, ni, rep});

    auto run_task = [&](const Task& task) {
        const Mrp& mrp = envs[task.gi];
        const int m = config.ms[task.mi];
        const std::uint64_t n = config.ns[task.ni];
        const SupportGrid grid = support_for(mrp, m, config.support_mode);
        const auto& oracle = oracles[task.gi];

        TransitionModel model;
        if (n == 0) {
            model = make_model(mrp);
        } else {
            const std::uint64_t data_seed = fold_in(
                fold_in(fold_in(fold_in(fold_in(config.seed, 0x64617461ull), task.gi), task.mi),
                        task.ni),
                static_cast<std::uint64_t>(task.rep));
            model = make_model(empirical_model(sample_dataset(mrp, n, data_seed)), mrp.gamma);
        }

        std::vector<ResultRow> rows;
        for (const Algo algo : config.algos) {
            ResultRow row;
            row.env = config.env;
            row.gamma = mrp.gamma;
            row.m = m;
            row.n = n;
            row.rep = task.rep;
            row.algo = algo_name(algo);
            row.support = support_name(config.support_mode);

            std::vector<DiscreteDistribution> dists;
            if (algo == Algo::qdp) {
                const int k = std::min(qdp_iteration_count(mrp.gamma), config.cdp_max_iters);
                const auto t0 = std::chrono::steady_clock::now();
                const auto [lo, hi] = config.support_mode == SupportMode::env_specific
                                          ? mrp.return_range()
                                          : std::pair<double, double>{0.0, 1.0 / (1.0 - mrp.gamma)};
                const QdpResult qr = qdp_solve(model, m, k, lo, hi);
                row.wallclock_ms = detail::ms_since(t0);
                row.iterations = qr.iterations;
                dists.reserve(static_cast<std::size_t>(model.n_states));
                for (int x = 0; x < model.n_states; ++x) dists.push_back(qr.table.distribution(x));
            } else {
                const auto tb = std::chrono::steady_clock::now();
                const CategoricalOperator op = build_operator(model, grid);
                row.build_ms = detail::ms_since(tb);
                CdfTable table;
                if (algo == Algo::dcfp || algo == Algo::d_dcfp) {
                    const auto t0 = std::chrono::steady_clock::now();
                    const DcfpResult dr = dcfp_solve(
                        op, algo == Algo::dcfp ? SolverKind::sparse : SolverKind::dense);
                    row.wallclock_ms = detail::ms_since(t0);
                    row.iterations = 1;
                    row.residual = dr.report.residual_inf;
                    table = dr.table;
                } else {
                    const int k =
                        std::min(cdp_iteration_count(mrp.gamma, 1e-6), config.cdp_max_iters);
                    row.iterations = k;
                    const CdfTable f0 = CdfTable::point_mass_at_first_atom(model.n_states, m);
                    if (algo == Algo::cdp) {
                        const auto t0 = std::chrono::steady_clock::now();
                        table = cdp_solve(op, f0, k).table;
                        row.wallclock_ms = detail::ms_since(t0);
                    } else {
                        const DenseOperator dop = densify_operator(op);
                        const auto t0 = std::chrono::steady_clock::now();
                        table = cdp_solve_dense(dop, f0, k).table;
                        row.wallclock_ms = detail::ms_since(t0);
                    }
                }
                dists = decode_distributions(table, grid);
            }

            double w1 = 0.0, l2 = 0.0;
            for (int x = 0; x < model.n_states; ++x) {
                w1 = std::max(w1, wasserstein1(dists[static_cast<std::size_t>(x)],
                                               oracle[static_cast<std::size_t>(x)]));
                l2 = std::max(l2, cramer(dists[static_cast<std::size_t>(x)],
                                         oracle[static_cast<std::size_t>(x)]));
            }
            row.sup_w1 = w1;
            row.sup_cramer = l2;
            rows.push_back(std::move(row));
        }
        return rows;
    };

    std::vector<ResultRow> all;
    if (csv) write_result_csv_header(*csv);

    if (config.threads <= 1) {
        for (const auto& task : tasks)
            for (auto& row : run_task(task)) {
                if (csv) write_result_row(row, *csv);
                all.push_back(std::move(row));
            }
        return all;
    }

    // Worker pool; the main thread flushes results in task order so the CSV
    // is identical to a serial run.
    std::vector<std::vector<ResultRow>> results(tasks.size());
    std::vector<char> done(tasks.size(), 0);
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), tasks.size());
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
                auto rows = run_task(tasks[i]);
                {
                    std::lock_guard<std::mutex> lock(mu);
                    results[i] = std::move(rows);
                    done[i] = 1;
                }
                cv.notify_all();
            }
        });
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [&] { return done[i] != 0; });
        for (auto& row : results[i]) {
            if (csv) write_result_row(row, *csv);
            all.push_back(std::move(row));
        }
        results[i].clear();
    }
    for (auto& t : pool) t.join();
    return all;
}

/// Percentile bootstrap interval for the mean.
inline std::pair<double, double> bootstrap_ci(std::span<const double> values, double level = 0.95,
                                              int n_boot = 2000, std::uint64_t seed = 0) {
    if (values.empty()) throw std::invalid_argument("bootstrap_ci: empty input");
    if (values.size() == 1) return {values[0], values[0]};
    SplitMix64 rng(fold_in(seed, 0x626f6f74ull));
    std::vector<double> means(static_cast<std::size_t>(n_boot));
    for (auto& mv : means) {
        double acc = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            acc += values[static_cast<std::size_t>(rng.next() % values.size())];
        mv = acc / static_cast<double>(values.size());
    }
    std::sort(means.begin(), means.end());
    const double q_lo = (1.0 - level) / 2.0;
    const double q_hi = 1.0 - q_lo;
    auto pick = [&](double q) {
        const auto idx = static_cast<std::size_t>(q * (means.size() - 1) + 0.5);
        return means[std::min(idx, means.size() - 1)];
    };
    return {pick(q_lo), pick(q_hi)};
}

struct TradeoffRow {
    std::string env;
    double gamma{};
    int m{};
    std::uint64_t n{};
    std::string algo;
    std::string support;
    int iterations{};
    int reps{};
    double mean_sup_w1{};
    double w1_ci_lo{}, w1_ci_hi{};
    double mean_sup_cramer{};
    double mean_wallclock_ms{};
};

/// Aggregates result rows per (env, gamma, m, n, algo, support, iterations)
/// cell: mean error with a bootstrap CI, and mean wallclock.
inline std::vector<TradeoffRow> tradeoff_table(std::span<const ResultRow> rows, int n_boot = 2000,
                                               std::uint64_t seed = 0) {
    using Key = std::tuple<std::string, double, int, std::uint64_t, std::string, std::string, int>;
    std::map<Key, std::vector<const ResultRow*>> groups;
    for (const auto& r : rows)
        groups[{r.env, r.gamma, r.m, r.n, r.algo, r.support, r.iterations}].push_back(&r);
    std::vector<TradeoffRow> out;
    for (const auto& [key, members] : groups) {
        TradeoffRow t;
        std::tie(t.env, t.gamma, t.m, t.n, t.algo, t.support, t.iterations) = key;
        t.reps = static_cast<int>(members.size());
        std::vector<double> w1s;
        for (const auto* r : members) {
            w1s.push_back(r->sup_w1);
            t.mean_sup_w1 += r->sup_w1;
            t.mean_sup_cramer += r->sup_cramer;
            t.mean_wallclock_ms += r->wallclock_ms;
        }
        t.mean_sup_w1 /= t.reps;
        t.mean_sup_cramer /= t.reps;
        t.mean_wallclock_ms /= t.reps;
        std::tie(t.w1_ci_lo, t.w1_ci_hi) = bootstrap_ci(w1s, 0.95, n_boot, seed);
        out.push_back(std::move(t));
    }
    return out;
}

inline void write_tradeoff_csv(std::span<const TradeoffRow> rows, std::ostream& out) {
    out << "env,gamma,m,n,algo,support,iterations,reps,mean_sup_w1,w1_ci_lo,w1_ci_hi,"
           "mean_sup_cramer,mean_wallclock_ms\n";
    char buf[512];
    for (const auto& t : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.10g,%d,%llu,%s,%s,%d,%d,%.10g,%.10g,%.10g,%.10g,%.6g\n",
                      t.env.c_str(), t.gamma, t.m, static_cast<unsigned long long>(t.n),
                      t.algo.c_str(), t.support.c_str(), t.iterations, t.reps, t.mean_sup_w1,
                      t.w1_ci_lo, t.w1_ci_hi, t.mean_sup_cramer, t.mean_wallclock_ms);
        out << buf;
    }
}

/// Reads back a results CSV produced by run_experiment.
inline std::vector<ResultRow> read_result_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("read_result_csv: empty file");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        ResultRow r;
        std::getline(ss, r.env, ',');
        std::getline(ss, field, ',');
        r.gamma = std::stod(field);
        std::getline(ss, field, ',');
        r.m = std::stoi(field);
        std::getline(ss, field, ',');
        r.n = std::stoull(field);
        std::getline(ss, field, ',');
        r.rep = std::stoi(field);
        std::getline(ss, r.algo, ',');
        std::getline(ss, r.support, ',');
        std::getline(ss, field, ',');
        r.iterations = std::stoi(field);
        std::getline(ss, field, ',');
        r.wallclock_ms = std::stod(field);
        std::getline(ss, field, ',');
        r.sup_w1 = std::stod(field);
        std::getline(ss, field, ',');
        r.sup_cramer = std::stod(field);
        if (std::getline(ss, field, ',') && !field.empty()) r.residual = std::stod(field);
        rows.push_back(std::move(r));
    }
    return rows;
}

/// JSON config file with the CLI's field names; see README for the schema.
inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path);
    nlohmann::json j;
    in >> j;
    ExperimentConfig c;
    if (j.contains("env")) c.env = j["env"].get<std::string>();
    if (j.contains("gammas")) c.gammas = j["gammas"].get<std::vector<double>>();
    if (j.contains("ms")) c.ms = j["ms"].get<std::vector<int>>();
    if (j.contains("ns")) c.ns = j["ns"].get<std::vector<std::uint64_t>>();
    if (j.contains("algos")) {
        c.algos.clear();
        for (const auto& a : j["algos"]) c.algos.push_back(parse_algo(a.get<std::string>()));
    }
    if (j.contains("support")) c.support_mode = parse_support(j["support"].get<std::string>());
    if (j.contains("reps")) c.reps = j["reps"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("mc_eps")) c.mc_eps = j["mc_eps"].get<double>();
    if (j.contains("mc_samples")) c.mc_samples = j["mc_samples"].get<std::size_t>();
    if (j.contains("cdp_iters")) c.cdp_max_iters = j["cdp_iters"].get<int>();
    if (j.contains("out")) c.out_path = j["out"].get<std::string>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("env_seed")) c.env_seed = j["env_seed"].get<std::uint64_t>();
    if (j.contains("mc_cache")) c.mc_cache_dir = j["mc_cache"].get<std::string>();
    c.validate();
    return c;
}

}  // namespace catdp
