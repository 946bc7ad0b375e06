// Experiment CLI: generative-model sweeps over distributional dynamic
// programming solvers, plus one-shot solves, Monte-Carlo oracles, stochastic
// fixed-point diagnostics, and trade-off aggregation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "catdp/categorical_operator.hpp"
#include "catdp/experiment.hpp"
#include "catdp/mc_oracle.hpp"
#include "catdp/quantile.hpp"
#include "catdp/sccdf.hpp"

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write output file: " + path);
    return out;
}

int run_sweep(const catdp::ExperimentConfig& config) {
    if (config.out_path.empty()) {
        catdp::run_experiment(config, &std::cout);
        return 0;
    }
    auto out = open_out(config.out_path);
    const auto rows = catdp::run_experiment(config, &out);
    std::fprintf(stderr, "wrote %zu rows to %s\n", rows.size(), config.out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributional dynamic programming solvers on Markov reward processes"};
    app.require_subcommand(0, 1);

    // Sweep flags live on the top-level command.
    catdp::ExperimentConfig config;
    config.gammas.clear();
    config.ms.clear();
    config.ns.clear();
    std::vector<std::string> algo_names;
    std::string support = "global";
    std::string config_path;
    app.add_option("--env", config.env, "Environment name (chain, low_random, high_random, two_state) or file path");
    app.add_option("--gamma", config.gammas, "Discount factor (repeatable)");
    app.add_option("--m", config.ms, "Number of atoms (repeatable)");
    app.add_option("--n", config.ns, "Generative samples per state; 0 = exact model (repeatable)");
    app.add_option("--algo", algo_names, "Algorithm: dcfp, d-dcfp, cdp, d-cdp, qdp (repeatable)");
    app.add_option("--support", support, "Atom support: global or env")
        ->check(CLI::IsMember({"global", "env"}));
    app.add_option("--reps", config.reps, "Repetitions per sweep cell");
    app.add_option("--seed", config.seed, "Master seed");
    app.add_option("--mc-eps", config.mc_eps, "MC oracle truncation tolerance");
    app.add_option("--mc-samples", config.mc_samples, "MC oracle samples per state");
    app.add_option("--cdp-iters", config.cdp_max_iters, "DP iteration cap");
    app.add_option("--out", config.out_path, "Output CSV path (stdout if omitted)");
    app.add_option("--config", config_path, "JSON config file; explicit flags override it");
    app.add_option("--threads", config.threads, "Worker threads for sweep cells");
    app.add_option("--env-seed", config.env_seed, "Seed for randomly generated environments");
    app.add_option("--mc-cache", config.mc_cache_dir, "Directory for cached MC oracle samples");

    // solve: run one algorithm on one cell and dump the solution table.
    auto* solve = app.add_subcommand("solve", "Solve one environment and write the table as CSV");
    std::string s_env = "two_state", s_algo = "dcfp", s_support = "global", s_out;
    double s_gamma = 0.9;
    int s_m = 100;
    std::uint64_t s_n = 0, s_seed = 1, s_env_seed = catdp::kDefaultEnvSeed;
    int s_iters = 30000;
    solve->add_option("--env", s_env, "Environment name or file path");
    solve->add_option("--gamma", s_gamma, "Discount factor");
    solve->add_option("--m", s_m, "Number of atoms");
    solve->add_option("--algo", s_algo, "Algorithm");
    solve->add_option("--support", s_support, "global or env")->check(CLI::IsMember({"global", "env"}));
    solve->add_option("--n", s_n, "Generative samples per state; 0 = exact model");
    solve->add_option("--seed", s_seed, "Dataset seed");
    solve->add_option("--env-seed", s_env_seed, "Seed for randomly generated environments");
    solve->add_option("--cdp-iters", s_iters, "DP iteration cap");
    solve->add_option("--out", s_out, "Output CSV path (stdout if omitted)");

    // mc: dump the Monte-Carlo return oracle.
    auto* mc = app.add_subcommand("mc", "Sample the Monte-Carlo return oracle and write CSV");
    std::string m_env = "two_state", m_out;
    double m_gamma = 0.9, m_eps = 1e-4;
    std::size_t m_samples = 10000;
    std::uint64_t m_seed = 1, m_env_seed = catdp::kDefaultEnvSeed;
    mc->add_option("--env", m_env, "Environment name or file path");
    mc->add_option("--gamma", m_gamma, "Discount factor");
    mc->add_option("--mc-eps", m_eps, "Truncation tolerance");
    mc->add_option("--mc-samples", m_samples, "Samples per state");
    mc->add_option("--seed", m_seed, "Seed");
    mc->add_option("--env-seed", m_env_seed, "Seed for randomly generated environments");
    mc->add_option("--out", m_out, "Output CSV path (stdout if omitted)");

    // sccdf: stochastic categorical fixed-point diagnostics.
    auto* sc = app.add_subcommand("sccdf", "Local/global squared-Cramér variation diagnostics");
    std::string c_env = "two_state", c_out, c_phi_out;
    double c_gamma = 0.9;
    int c_m = 15, c_depth = 0, c_phi_dump = 5;
    std::size_t c_nphi = 10000;
    std::uint64_t c_seed = 1, c_env_seed = catdp::kDefaultEnvSeed;
    int c_threads = 1;
    sc->add_option("--env", c_env, "Environment name or file path");
    sc->add_option("--gamma", c_gamma, "Discount factor");
    sc->add_option("--m", c_m, "Number of atoms");
    sc->add_option("--n-phi", c_nphi, "Monte-Carlo sample count for the global variation");
    sc->add_option("--depth", c_depth, "Composition depth for Phi samples; 0 = automatic");
    sc->add_option("--seed", c_seed, "Seed");
    sc->add_option("--env-seed", c_env_seed, "Seed for randomly generated environments");
    sc->add_option("--threads", c_threads, "Worker threads");
    sc->add_option("--out", c_out, "Variation CSV path (stdout if omitted)");
    sc->add_option("--phi-out", c_phi_out, "Optional CSV of sampled Phi CDFs");
    sc->add_option("--phi-count", c_phi_dump, "How many Phi samples to dump");

    // tradeoff: aggregate a results CSV.
    auto* trade = app.add_subcommand("tradeoff", "Aggregate a results CSV into error/time cells");
    std::string t_in, t_out;
    int t_boot = 2000;
    std::uint64_t t_seed = 0;
    trade->add_option("--in", t_in, "Results CSV from a sweep")->required();
    trade->add_option("--out", t_out, "Output CSV path (stdout if omitted)");
    trade->add_option("--n-boot", t_boot, "Bootstrap resamples");
    trade->add_option("--seed", t_seed, "Bootstrap seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            const auto mrp = catdp::make_environment(s_env, s_gamma, s_env_seed);
            const auto grid = catdp::support_for(mrp, s_m, catdp::parse_support(s_support));
            catdp::TransitionModel model =
                s_n == 0 ? catdp::make_model(mrp)
                         : catdp::make_model(
                               catdp::empirical_model(catdp::sample_dataset(mrp, s_n, s_seed)),
                               mrp.gamma);
            std::ostream* outp = &std::cout;
            std::ofstream file;
            if (!s_out.empty()) {
                file = open_out(s_out);
                outp = &file;
            }
            const catdp::Algo algo = catdp::parse_algo(s_algo);
            if (algo == catdp::Algo::qdp) {
                const int k = std::min(catdp::qdp_iteration_count(mrp.gamma), s_iters);
                const auto [lo, hi] = s_support == "env"
                                          ? mrp.return_range()
                                          : std::pair<double, double>{0.0, 1.0 / (1.0 - mrp.gamma)};
                catdp::write_csv(catdp::qdp_solve(model, s_m, k, lo, hi).table, *outp);
            } else if (algo == catdp::Algo::cdp || algo == catdp::Algo::d_cdp) {
                const auto op = catdp::build_operator(model, grid);
                const int k = std::min(catdp::cdp_iteration_count(mrp.gamma, 1e-6), s_iters);
                const auto f0 = catdp::CdfTable::point_mass_at_first_atom(model.n_states, s_m);
                catdp::write_csv(catdp::cdp_solve(op, f0, k).table, grid, *outp);
            } else {
                const auto kind = algo == catdp::Algo::dcfp ? catdp::SolverKind::sparse
                                                            : catdp::SolverKind::dense;
                const auto res = catdp::dcfp_solve(catdp::build_operator(model, grid), kind);
                std::fprintf(stderr, "residual_inf=%.3e\n", res.report.residual_inf);
                catdp::write_csv(res.table, grid, *outp);
            }
            return 0;
        }
        if (mc->parsed()) {
            const auto mrp = catdp::make_environment(m_env, m_gamma, m_env_seed);
            const auto rs = catdp::mc_returns(mrp, m_eps, m_samples, m_seed);
            if (m_out.empty()) {
                catdp::write_csv(rs, std::cout);
            } else {
                auto out = open_out(m_out);
                catdp::write_csv(rs, out);
            }
            return 0;
        }
        if (sc->parsed()) {
            const auto mrp = catdp::make_environment(c_env, c_gamma, c_env_seed);
            const auto grid = catdp::make_grid(c_m, c_gamma);
            const auto op = catdp::build_operator(catdp::make_model(mrp), grid);
            const auto fq = catdp::dcfp_solve(op).table;
            const int depth = c_depth > 0 ? c_depth : catdp::cdp_iteration_count(c_gamma, 1e-6);
            const auto sigma = catdp::local_variation_exact(op, fq);
            const auto global =
                catdp::global_variation_mc(op, fq, c_nphi, depth, c_seed, c_threads);
            const auto slack = catdp::check_scc_inequality(op, sigma, global.sigma_global);
            std::ostream* outp = &std::cout;
            std::ofstream file;
            if (!c_out.empty()) {
                file = open_out(c_out);
                outp = &file;
            }
            *outp << "state,sigma,sigma_global,stderr,slack\n";
            char buf[160];
            for (int x = 0; x < op.n_states; ++x) {
                std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g\n", x, sigma[x],
                              global.sigma_global[x], global.std_error[x], slack[x]);
                *outp << buf;
            }
            if (!c_phi_out.empty()) {
                auto phi_out = open_out(c_phi_out);
                phi_out << "state,sample,atom_index,z,cdf\n";
                for (int s = 0; s < c_phi_dump; ++s) {
                    catdp::SplitMix64 rng(catdp::fold_in(c_seed, 0x70686975ull + s));
                    const auto phi = catdp::sample_phi(op, fq, depth, rng);
                    for (int x = 0; x < op.n_states; ++x)
                        for (int i = 0; i < op.m; ++i) {
                            std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.10g,%.10g\n", x, s, i,
                                          grid.z[static_cast<std::size_t>(i)], phi.table.at(x, i));
                            phi_out << buf;
                        }
                }
            }
            return 0;
        }
        if (trade->parsed()) {
            std::ifstream in(t_in);
            if (!in) throw std::runtime_error("cannot open " + t_in);
            const auto rows = catdp::read_result_csv(in);
            const auto agg = catdp::tradeoff_table(rows, t_boot, t_seed);
            if (t_out.empty()) {
                catdp::write_tradeoff_csv(agg, std::cout);
            } else {
                auto out = open_out(t_out);
                catdp::write_tradeoff_csv(agg, out);
            }
            return 0;
        }

        // No subcommand: run the sweep.
        if (!config_path.empty()) {
            catdp::ExperimentConfig from_file = catdp::load_config(config_path);
            // Flags given explicitly on the command line win over the file.
            if (app.count("--env")) from_file.env = config.env;
            if (app.count("--gamma")) from_file.gammas = config.gammas;
            if (app.count("--m")) from_file.ms = config.ms;
            if (app.count("--n")) from_file.ns = config.ns;
            if (app.count("--algo")) {
                from_file.algos.clear();
                for (const auto& a : algo_names) from_file.algos.push_back(catdp::parse_algo(a));
            }
            if (app.count("--support")) from_file.support_mode = catdp::parse_support(support);
            if (app.count("--reps")) from_file.reps = config.reps;
            if (app.count("--seed")) from_file.seed = config.seed;
            if (app.count("--mc-eps")) from_file.mc_eps = config.mc_eps;
            if (app.count("--mc-samples")) from_file.mc_samples = config.mc_samples;
            if (app.count("--cdp-iters")) from_file.cdp_max_iters = config.cdp_max_iters;
            if (app.count("--out")) from_file.out_path = config.out_path;
            if (app.count("--threads")) from_file.threads = config.threads;
            if (app.count("--env-seed")) from_file.env_seed = config.env_seed;
            if (app.count("--mc-cache")) from_file.mc_cache_dir = config.mc_cache_dir;
            return run_sweep(from_file);
        }
        if (config.gammas.empty()) config.gammas = {0.9};
        if (config.ms.empty()) config.ms = {100};
        if (config.ns.empty()) config.ns = {1000000};
        if (!algo_names.empty()) {
            config.algos.clear();
            for (const auto& a : algo_names) config.algos.push_back(catdp::parse_algo(a));
        }
        config.support_mode = catdp::parse_support(support);
        return run_sweep(config);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
