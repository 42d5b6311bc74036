/*
 * Copyright 2026 The chainbound authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 */

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chainbound/pipeline.hpp"

using namespace chainbound;

namespace {

int run_bound_cmd(const std::string& config_path, RunConfig cfg, bool have_flags) {
    if (!config_path.empty()) {
        RunConfig file_cfg = RunConfig::from_doc(ConfigDoc::load(config_path));
        if (have_flags) {
            // explicit flags override the file fields they duplicate
            if (!cfg.space_spec.empty()) file_cfg.space_spec = cfg.space_spec;
            if (!cfg.paths_spec.empty()) file_cfg.paths_spec = cfg.paths_spec;
            if (cfg.phi_spec != "subgaussian") file_cfg.phi_spec = cfg.phi_spec;
            if (!cfg.u_grid.empty()) file_cfg.u_grid = cfg.u_grid;
            if (cfg.C_grid != std::vector<double>{1.0}) file_cfg.C_grid = cfg.C_grid;
            if (cfg.mode != "t1") file_cfg.mode = cfg.mode;
            if (cfg.out_dir != ".") file_cfg.out_dir = cfg.out_dir;
        }
        cfg = std::move(file_cfg);
    }
    cfg.validate();
    const auto res = run_bound(cfg);
    if (!res.csv_path.empty()) std::printf("wrote %s\n", res.csv_path.c_str());
    if (!res.json_path.empty()) std::printf("wrote %s\n", res.json_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exponential bounds for the maximum of a random field, with "
                 "Monte-Carlo verification"};
    app.require_subcommand(1);

    // ---- bound ----
    auto* bound = app.add_subcommand("bound", "compute tail bound reports");
    std::string b_config, b_space, b_paths, b_phi = "subgaussian", b_mode = "t1";
    std::string b_out = ".", b_name = "run", b_format = "csv,json";
    std::vector<double> b_u, b_C = {1.0}, b_rho, b_delta;
    double b_cdoob = 0.5;
    bound->add_option("--config", b_config, "config file driving the run");
    bound->add_option("--space", b_space, "distance matrix (csv/json) or preset:<name>");
    bound->add_option("--paths", b_paths, "sample-path matrix csv (for t2 modes)");
    bound->add_option("--phi", b_phi, "subgaussian | power:<r> | natural:<path>");
    bound->add_option("--u", b_u, "threshold grid")->delimiter(',');
    bound->add_option("--C", b_C, "free-constant grid")->delimiter(',');
    bound->add_option("--mode", b_mode,
                      "t1 | t2-fixed:<n> | t2-uniform:<n_max> | martingale:<d>,<n_max>[,<Q>]");
    bound->add_option("--rho", b_rho, "geometric weight parameters")->delimiter(',');
    bound->add_option("--delta", b_delta, "chaining radius grid")->delimiter(',');
    bound->add_option("--cdoob", b_cdoob, "maximal-inequality constant (martingale mode)");
    bound->add_option("--out", b_out, "output directory");
    bound->add_option("--name", b_name, "experiment name / file prefix");
    bound->add_option("--format", b_format, "csv, json, or csv,json");

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "Monte-Carlo tail estimation");
    std::string s_kind, s_out = ".", s_name = "run", s_format = "csv";
    std::uint64_t s_reps = 0, s_seed = 0;
    std::vector<double> s_u;
    sim->add_option("--kind", s_kind,
                    "gaussian:<cov.csv>|exampleA:<n>|polymart:<d>,<n>|sum:<base>,<n>")
        ->required();
    sim->add_option("--replicates", s_reps, "replicate count")->required();
    sim->add_option("--seed", s_seed, "stream seed")->required();
    sim->add_option("--u", s_u, "threshold grid")->required()->delimiter(',');
    sim->add_option("--out", s_out, "output directory");
    sim->add_option("--name", s_name, "file prefix");
    sim->add_option("--format", s_format, "csv, json, or csv,json");

    // ---- verify ----
    auto* ver = app.add_subcommand("verify", "check bound dominance over an empirical tail");
    std::string v_bound, v_tail, v_out = ".", v_name = "run", v_format = "csv";
    ver->add_option("--bound", v_bound, "bound report csv")->required();
    ver->add_option("--tail", v_tail, "empirical tail csv")->required();
    ver->add_option("--out", v_out, "output directory");
    ver->add_option("--name", v_name, "file prefix");
    ver->add_option("--format", v_format, "csv, json, or csv,json");

    // ---- chain-inspect ----
    auto* ins = app.add_subcommand("chain-inspect", "print a chaining sequence of one ball");
    std::string i_space, i_t0, i_strategy = "dyadic", i_json, i_format = "csv";
    double i_delta = 1.0, i_rho = 0.75;
    ins->add_option("--space", i_space, "distance matrix or preset")->required();
    ins->add_option("--t0", i_t0, "ball center label")->required();
    ins->add_option("--delta", i_delta, "ball radius in (0,1]");
    ins->add_option("--rho", i_rho, "geometric weight parameter");
    ins->add_option("--strategy", i_strategy, "dyadic | refine");
    ins->add_option("--json", i_json, "also dump the chain as json to this path");
    ins->add_option("--format", i_format, "csv (table) or json (chain to stdout)");

    // ---- phi-fit ----
    auto* fit = app.add_subcommand("phi-fit", "fit the natural weight from sample paths");
    std::string f_paths, f_out = "phi.json", f_format = "json";
    double f_lambda_max = 2.0;
    std::size_t f_points = 32;
    bool f_norm = false;
    fit->add_option("--paths", f_paths, "sample-path matrix csv")->required();
    fit->add_option("--lambda-max", f_lambda_max, "largest grid magnitude");
    fit->add_option("--points", f_points, "grid points per sign");
    fit->add_option("--out", f_out, "output path");
    fit->add_option("--format", f_format, "json (weight object) or csv (lambda,value table)");
    fit->add_flag("--norm", f_norm, "also print the sup coordinate norm under the fit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage errors
    }

    try {
        if (bound->parsed()) {
            RunConfig cfg;
            cfg.space_spec = b_space;
            cfg.paths_spec = b_paths;
            cfg.phi_spec = b_phi;
            cfg.mode = b_mode;
            cfg.u_grid = b_u;
            cfg.C_grid = b_C;
            if (!b_rho.empty()) cfg.rho = b_rho;
            cfg.delta_grid = b_delta;
            cfg.c_doob = b_cdoob;
            cfg.out_dir = b_out;
            cfg.name = b_name;
            cfg.emit_csv = b_format.find("csv") != std::string::npos;
            cfg.emit_json = b_format.find("json") != std::string::npos;
            const bool have_flags = !b_space.empty() || !b_paths.empty() || !b_u.empty();
            return run_bound_cmd(b_config, std::move(cfg), have_flags);
        }
        if (sim->parsed()) {
            const auto res = run_simulate(s_kind, s_reps, s_seed, s_u, s_out, s_name);
            std::printf("wrote %s\n", res.csv_path.c_str());
            if (s_format.find("json") != std::string::npos) {
                nlohmann::json j;
                j["kind"] = s_kind;
                j["replicates"] = s_reps;
                j["seed"] = s_seed;
                nlohmann::json rows = nlohmann::json::array();
                for (std::size_t i = 0; i < res.tail.u_grid.size(); ++i)
                    rows.push_back({{"u", res.tail.u_grid[i]},
                                    {"count", res.tail.count[i]},
                                    {"p_hat", res.tail.p_hat[i]},
                                    {"ci_lo", res.tail.ci_lo[i]},
                                    {"ci_hi", res.tail.ci_hi[i]}});
                j["rows"] = rows;
                const std::string jp = s_out + "/" + s_name + "_tail.json";
                std::ofstream out(jp);
                out << j.dump(2) << "\n";
                std::printf("wrote %s\n", jp.c_str());
            }
            std::printf("wrote %s\n", res.sup_path.c_str());
            return 0;
        }
        if (ver->parsed()) {
            const auto res =
                verify_dominance(parse_bound_csv(v_bound), parse_tail_csv(v_tail));
            if (res.empty_after_filter)
                throw ConfigError("verify: no thresholds remain inside the validity range");
            std::filesystem::create_directories(v_out);
            if (v_format.find("csv") != std::string::npos) {
                const std::string p = v_out + "/" + v_name + "_verdict.csv";
                std::ofstream out(p);
                out << verify_to_csv(res);
                std::printf("wrote %s\n", p.c_str());
            }
            if (v_format.find("json") != std::string::npos) {
                nlohmann::json rows = nlohmann::json::array();
                for (const auto& r : res.rows)
                    rows.push_back({{"u", r.u},
                                    {"bound", r.bound},
                                    {"ci_hi", r.ci_hi},
                                    {"dominated", r.dominated},
                                    {"log_ratio", r.log_ratio},
                                    {"checked", r.checked}});
                const std::string p = v_out + "/" + v_name + "_verdict.json";
                std::ofstream out(p);
                out << nlohmann::json{{"pass", res.pass}, {"rows", rows}}.dump(2) << "\n";
                std::printf("wrote %s\n", p.c_str());
            }
            std::printf("%s\n", res.pass ? "PASS: bound dominates the empirical tail"
                                         : "FAIL: empirical tail exceeds the bound");
            return res.pass ? 0 : 1;
        }
        if (ins->parsed()) {
            const auto space = resolve_space(i_space);
            std::uint32_t t0 = 0;
            bool found = false;
            for (std::size_t i = 0; i < space.size(); ++i) {
                if (space.labels()[i] == i_t0) {
                    t0 = static_cast<std::uint32_t>(i);
                    found = true;
                    break;
                }
            }
            if (!found) throw ConfigError("chain-inspect: unknown label '" + i_t0 + "'");
            const ChainStrategy strat =
                i_strategy == "refine" ? ChainStrategy::GreedyRefine : ChainStrategy::DyadicNets;
            const auto chain = build_chain(space, t0, i_delta, strat);
            const auto gamma = default_gamma(std::max<std::size_t>(chain.depth(), 8), i_rho);
            if (i_format.find("json") != std::string::npos) {
                std::printf("%s\n", chain_to_json(space, chain, gamma).dump(2).c_str());
            } else {
                std::printf("ball center %s, radius %s, %zu points, depth %zu\n", i_t0.c_str(),
                            format_double(i_delta).c_str(), chain.ball.size(), chain.depth());
                std::printf("%-6s %-8s %-18s %-18s\n", "level", "size", "max_proj_dist",
                            "increment/gamma");
                for (std::size_t m = 0; m < chain.levels.size(); ++m) {
                    double mx = 0.0, inc = 0.0;
                    for (std::size_t k = 0; k < chain.ball.size(); ++k) {
                        mx = std::max(mx, space.dist(chain.ball[k], chain.proj[m][k]));
                        if (m > 0)
                            inc = std::max(inc,
                                           space.dist(chain.proj[m][k], chain.proj[m - 1][k]) /
                                               gamma.at(m));
                    }
                    std::printf("%-6zu %-8zu %-18s %-18s\n", m, chain.levels[m].size(),
                                format_double(mx).c_str(), m ? format_double(inc).c_str() : "-");
                }
                std::printf("L = %s\n", format_double(chain_L(space, chain, gamma)).c_str());
            }
            if (!i_json.empty()) {
                std::ofstream out(i_json);
                out << chain_to_json(space, chain, gamma).dump(2) << "\n";
                std::printf("wrote %s\n", i_json.c_str());
            }
            return 0;
        }
        if (fit->parsed()) {
            const auto paths = matrix_from_csv(f_paths);
            std::vector<double> grid;
            for (std::size_t i = f_points; i > 0; --i)
                grid.push_back(-f_lambda_max * static_cast<double>(i) / f_points);
            for (std::size_t i = 1; i <= f_points; ++i)
                grid.push_back(f_lambda_max * static_cast<double>(i) / f_points);
            const auto nat = natural_phi(paths, grid);
            std::ofstream out(f_out);
            if (f_format.find("csv") != std::string::npos && f_format.find("json") == std::string::npos) {
                out << "lambda,value\n";
                for (std::size_t i = 0; i < nat.grid().size(); ++i)
                    out << format_double(nat.grid()[i]) << "," << format_double(nat.values()[i])
                        << "\n";
            } else {
                out << phi_to_json(nat).dump(2) << "\n";
            }
            std::printf("wrote %s (%zu knots, domain radius %s)\n", f_out.c_str(),
                        nat.grid().size(), format_double(nat.lambda0()).c_str());
            if (f_norm) {
                // stay inside the fitted domain when evaluating the MGF fit
                std::vector<double> inner;
                for (double l : grid)
                    if (std::fabs(l) < 0.95 * nat.lambda0()) inner.push_back(l);
                double sup = 0.0;
                std::vector<double> col(paths.rows);
                for (std::size_t c = 0; c < paths.cols; ++c) {
                    double mean = 0.0;
                    for (std::size_t r = 0; r < paths.rows; ++r) mean += paths.at(r, c);
                    mean /= static_cast<double>(paths.rows);
                    for (std::size_t r = 0; r < paths.rows; ++r)
                        col[r] = paths.at(r, c) - mean;
                    sup = std::max(sup, bphi_norm_mgf(col, nat, inner).value);
                }
                std::printf("sup coordinate norm under the fit: %s\n",
                            format_double(sup).c_str());
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "numeric domain error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
