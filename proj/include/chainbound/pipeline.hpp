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

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainbound/field_sim.hpp"
#include "chainbound/presets.hpp"
#include "chainbound/serialize.hpp"
#include "chainbound/tail_bounds.hpp"

namespace chainbound {

/// Configuration or usage problem: maps to exit code 2 at the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// structured key/value document with nested [section] headers

struct ConfigDoc {
    using Section = std::vector<std::pair<std::string, std::string>>;
    std::vector<std::pair<std::string, Section>> sections;

    static ConfigDoc parse(const std::string& text) {
        ConfigDoc doc;
        std::stringstream ss(text);
        std::string line;
        std::size_t lineno = 0;
        std::string current;
        while (std::getline(ss, line)) {
            ++lineno;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            const auto last = line.find_last_not_of(" \t\r");
            std::string body = line.substr(first, last - first + 1);
            if (body[0] == '#' || body[0] == ';') continue;
            if (body.front() == '[') {
                if (body.back() != ']')
                    throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
                current = body.substr(1, body.size() - 2);
                doc.sections.emplace_back(current, Section{});
                continue;
            }
            const auto eq = body.find('=');
            if (eq == std::string::npos)
                throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
            std::string key = body.substr(0, eq);
            std::string val = body.substr(eq + 1);
            const auto trim = [](std::string& s) {
                const auto a = s.find_first_not_of(" \t");
                const auto b = s.find_last_not_of(" \t");
                s = (a == std::string::npos) ? "" : s.substr(a, b - a + 1);
            };
            trim(key);
            trim(val);
            if (key.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty key");
            if (doc.sections.empty()) doc.sections.emplace_back("", Section{});
            doc.sections.back().second.emplace_back(key, val);
        }
        return doc;
    }

    static ConfigDoc load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    std::string emit() const {
        std::string out;
        for (const auto& [name, kv] : sections) {
            if (!name.empty()) out += "[" + name + "]\n";
            for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
        }
        return out;
    }

    const std::string* find(const std::string& section, const std::string& key) const {
        for (const auto& [name, kv] : sections) {
            if (name != section) continue;
            for (const auto& [k, v] : kv)
                if (k == key) return &v;
        }
        return nullptr;
    }
};

inline std::vector<double> parse_grid(const std::string& text, const std::string& what) {
    std::vector<double> g;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            g.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw ConfigError(what + ": cannot parse '" + cell + "' as a number");
        }
    }
    if (g.empty()) throw ConfigError(what + ": empty grid");
    for (std::size_t i = 1; i < g.size(); ++i)
        if (!(g[i] > g[i - 1])) throw ConfigError(what + ": grid must be strictly increasing");
    return g;
}

struct RunConfig {
    std::string name = "run";
    std::string phi_spec = "subgaussian";
    std::string space_spec;
    std::string paths_spec;
    std::string mode = "t1";
    std::vector<double> u_grid;
    std::vector<double> C_grid = {1.0};
    std::vector<double> rho = {0.70, 0.75, 0.80, 0.85, 0.90};
    std::vector<double> delta_grid;  // empty: automatic geometric grid
    std::size_t max_depth = 24;
    std::size_t ball_cap = 1024;
    bool use_refine = true;
    double c_doob = 0.5;
    std::uint64_t replicates = 0;
    std::uint64_t seed = 0;
    bool has_sim = false;
    std::string sim_kind;
    std::string out_dir = ".";
    bool emit_csv = true;
    bool emit_json = true;

    void validate() const {
        if (u_grid.empty()) throw ConfigError("bound.u: required nonempty grid");
        if (C_grid.empty() && mode.rfind("martingale", 0) != 0)
            throw ConfigError("bound.C: required nonempty grid");
        if (mode.rfind("t2", 0) == 0 && paths_spec.empty())
            throw ConfigError("space.paths: sample paths required for the sum modes");
        if (mode.rfind("martingale", 0) != 0 && space_spec.empty() && paths_spec.empty())
            throw ConfigError("space.source: required");
        if (has_sim && replicates == 0) throw ConfigError("sim.replicates: must be positive");
    }

    static RunConfig from_doc(const ConfigDoc& doc) {
        RunConfig c;
        const auto get = [&](const char* sec, const char* key) { return doc.find(sec, key); };
        if (const auto* v = get("experiment", "name")) c.name = *v;
        if (const auto* v = get("phi", "kind")) c.phi_spec = *v;
        if (const auto* v = get("space", "source")) c.space_spec = *v;
        if (const auto* v = get("space", "paths")) c.paths_spec = *v;
        if (const auto* v = get("bound", "mode")) c.mode = *v;
        if (const auto* v = get("bound", "u")) c.u_grid = parse_grid(*v, "bound.u");
        if (const auto* v = get("bound", "C")) c.C_grid = parse_grid(*v, "bound.C");
        if (const auto* v = get("bound", "c_doob")) c.c_doob = std::stod(*v);
        if (const auto* v = get("chaining", "rho")) c.rho = parse_grid(*v, "chaining.rho");
        if (const auto* v = get("chaining", "delta"))
            c.delta_grid = parse_grid(*v, "chaining.delta");
        if (const auto* v = get("chaining", "max_depth"))
            c.max_depth = static_cast<std::size_t>(std::stoul(*v));
        if (const auto* v = get("chaining", "ball_cap"))
            c.ball_cap = static_cast<std::size_t>(std::stoul(*v));
        if (const auto* v = get("chaining", "refine")) c.use_refine = (*v == "true" || *v == "1");
        if (const auto* v = get("sim", "replicates")) {
            c.replicates = std::stoull(*v);
            c.has_sim = true;
        }
        if (const auto* v = get("sim", "seed")) c.seed = std::stoull(*v);
        else if (c.has_sim) throw ConfigError("sim.seed: required whenever sim is configured");
        if (const auto* v = get("sim", "kind")) c.sim_kind = *v;
        if (const auto* v = get("output", "dir")) c.out_dir = *v;
        if (const auto* v = get("output", "format")) {
            c.emit_csv = v->find("csv") != std::string::npos;
            c.emit_json = v->find("json") != std::string::npos;
            if (!c.emit_csv && !c.emit_json)
                throw ConfigError("output.format: must mention csv and/or json");
        }
        c.validate();
        return c;
    }
};

// ---------------------------------------------------------------------------
// phi / space resolution

inline PhiFunction resolve_phi(const std::string& spec) {
    if (spec == "subgaussian") return PhiFunction::subgaussian();
    if (spec.rfind("power:", 0) == 0) {
        try {
            return PhiFunction::power_type(std::stod(spec.substr(6)));
        } catch (const DomainError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("phi: cannot parse exponent in '" + spec + "'");
        }
    }
    if (spec.rfind("natural:", 0) == 0) {
        const std::string path = spec.substr(8);
        std::ifstream in(path);
        if (!in) throw ConfigError("phi: cannot open " + path);
        nlohmann::json j;
        in >> j;
        return phi_from_json(j);
    }
    throw ConfigError("phi: unknown spec '" + spec + "' (subgaussian | power:<r> | natural:<path>)");
}

inline FiniteMetricSpace resolve_space(const std::string& spec) {
    std::string s = spec;
    if (s.rfind("preset:", 0) == 0) s = s.substr(7);
    if (s == "singleton") return singleton_space();
    if (s.rfind("exampleA:", 0) == 0) {
        std::string rest = s.substr(9);
        bool zero = true;
        if (const auto pos = rest.find(":nozero"); pos != std::string::npos) {
            zero = false;
            rest = rest.substr(0, pos);
        }
        return example_a_space(std::stoul(rest), zero);
    }
    if (s.rfind("se:", 0) == 0) {
        const auto rest = s.substr(3);
        const auto colon = rest.find(':');
        if (colon == std::string::npos) throw ConfigError("space: preset se:<n>:<ell>");
        return gaussian_natural_distance(
            se_kernel_cov(std::stoul(rest.substr(0, colon)), std::stod(rest.substr(colon + 1))));
    }
    if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json") {
        std::ifstream in(spec);
        if (!in) throw ConfigError("space: cannot open " + spec);
        nlohmann::json j;
        in >> j;
        return FiniteMetricSpace::from_json(j);
    }
    if (std::filesystem::exists(spec)) return FiniteMetricSpace::from_csv(spec);
    throw ConfigError("space: unknown spec or missing file '" + spec + "'");
}

// ---------------------------------------------------------------------------
// bound runs

inline std::string flags_token(const TailBoundReport& r) {
    std::string f;
    const auto add = [&](const char* t) {
        if (!f.empty()) f += ';';
        f += t;
    };
    if (r.below_u0) add("below_u0");
    if (r.no_onset) add("no_onset");
    if (r.k_inverse_capped) add("capped");
    return f.empty() ? "-" : f;
}

inline std::string bound_rows_to_csv(const std::vector<TailBoundReport>& rows) {
    std::string out = "u,C,N,delta,phi_star,bound,flags\n";
    for (const auto& r : rows) {
        out += format_double(r.u) + "," + format_double(r.C) + "," +
               std::to_string(r.covering_count) + "," + format_double(r.delta_used) + "," +
               format_double(r.conj_value) + "," + format_double(r.bound) + "," +
               flags_token(r) + "\n";
    }
    return out;
}

inline nlohmann::json bound_rows_to_json(const std::vector<TailBoundReport>& rows,
                                         const RunConfig& cfg) {
    nlohmann::json rj = nlohmann::json::array();
    for (const auto& r : rows) {
        rj.push_back({{"u", r.u},
                      {"C", r.C},
                      {"N", r.covering_count},
                      {"delta", r.delta_used},
                      {"phi_star", r.conj_value},
                      {"bound", r.bound},
                      {"two_sided", r.two_sided()},
                      {"u0", r.no_onset ? nlohmann::json() : nlohmann::json(r.u0)},
                      {"below_u0", r.below_u0},
                      {"no_onset", r.no_onset},
                      {"capped", r.k_inverse_capped}});
    }
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%FT%TZ", std::gmtime(&tt));
    return {{"experiment", cfg.name},
            {"phi", cfg.phi_spec},
            {"space", cfg.space_spec},
            {"mode", cfg.mode},
            {"timestamp", stamp},
            {"rows", rj}};
}

struct BoundRunResult {
    std::vector<TailBoundReport> rows;
    std::string csv_path;
    std::string json_path;
};

inline KProfileOptions chaining_options(const RunConfig& cfg) {
    KProfileOptions opt;
    opt.rhos = cfg.rho;
    opt.strategies = {ChainStrategy::DyadicNets};
    if (cfg.use_refine) opt.strategies.push_back(ChainStrategy::GreedyRefine);
    opt.build.max_levels = cfg.max_depth;
    opt.build.dyadic_ball_cap = cfg.ball_cap;
    return opt;
}

inline PipelineParams pipeline_params(const RunConfig& cfg) {
    PipelineParams p;
    p.delta_grid = cfg.delta_grid;
    p.chaining = chaining_options(cfg);
    p.u_max_hint = cfg.u_grid.back();
    return p;
}

inline std::vector<TailBoundReport> compute_bound_rows(const RunConfig& cfg) {
    std::vector<TailBoundReport> rows;
    if (cfg.mode.rfind("martingale", 0) == 0) {
        // martingale:<d>,<n_max>[,<Q>]
        const auto rest = cfg.mode.substr(cfg.mode.find(':') + 1);
        std::stringstream ss(rest);
        std::string tok;
        std::vector<std::uint64_t> vals;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stoull(tok));
        if (vals.size() < 2) throw ConfigError("bound.mode: martingale:<d>,<n_max>[,<Q>]");
        const int d = static_cast<int>(vals[0]);
        const std::uint64_t n_max = vals[1];
        const std::uint64_t Q = vals.size() > 2 ? vals[2] : 2;
        const auto model = poly_martingale_model(d, cfg.c_doob);
        const auto part = BlockPartition::geometric(Q, static_cast<std::uint64_t>(d), n_max);
        for (double u : cfg.u_grid) {
            const auto b = martingale_block_bound(model, part, u);
            TailBoundReport r;
            r.u = u;
            r.C = cfg.c_doob;
            r.covering_count = part.blocks.size();
            r.delta_used = 0.0;
            r.conj_value = -std::log(b.total);
            r.bound = b.total;
            rows.push_back(r);
        }
        return rows;
    }

    const PhiFunction base_phi = resolve_phi(cfg.phi_spec);
    BoundPipeline pl;
    if (cfg.mode == "t1") {
        if (!cfg.space_spec.empty()) {
            pl = make_pipeline(resolve_space(cfg.space_spec), base_phi, pipeline_params(cfg));
        } else {
            pl = make_pipeline_from_samples(matrix_from_csv(cfg.paths_spec), base_phi,
                                            pipeline_params(cfg));
        }
    } else if (cfg.mode.rfind("t2-fixed:", 0) == 0) {
        const std::size_t n = std::stoul(cfg.mode.substr(9));
        pl = theorem2_pipeline(matrix_from_csv(cfg.paths_spec), base_phi, FixedN{n},
                               pipeline_params(cfg));
    } else if (cfg.mode.rfind("t2-uniform", 0) == 0) {
        std::size_t n_max = 64;
        if (const auto colon = cfg.mode.find(':'); colon != std::string::npos)
            n_max = std::stoul(cfg.mode.substr(colon + 1));
        pl = theorem2_pipeline(matrix_from_csv(cfg.paths_spec), base_phi, UniformInN{n_max},
                               pipeline_params(cfg));
    } else {
        throw ConfigError("bound.mode: unknown mode '" + cfg.mode + "'");
    }

    for (double C : cfg.C_grid) {
        const U0Result onset = u0_of_C(pl.profile, pl.conj, C, pl.u_scan);
        for (double u : cfg.u_grid) {
            try {
                rows.push_back(theorem1_bound(pl.space, pl.profile, pl.conj, C, u, onset));
            } catch (const DomainError& e) {
                throw DomainError("at u=" + format_double(u) + ", C=" + format_double(C) + ": " +
                                  e.what());
            }
        }
    }
    return rows;
}

inline BoundRunResult run_bound(const RunConfig& cfg) {
    cfg.validate();
    BoundRunResult res;
    res.rows = compute_bound_rows(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    if (cfg.emit_csv) {
        res.csv_path = cfg.out_dir + "/" + cfg.name + "_bound.csv";
        std::ofstream out(res.csv_path);
        out << bound_rows_to_csv(res.rows);
    }
    if (cfg.emit_json) {
        res.json_path = cfg.out_dir + "/" + cfg.name + "_bound.json";
        std::ofstream out(res.json_path);
        out << bound_rows_to_json(res.rows, cfg).dump(2) << "\n";
    }
    return res;
}

// ---------------------------------------------------------------------------
// simulate runs

struct SimulateResult {
    EmpiricalTail tail;
    std::string csv_path;
    std::string sup_path;
};

inline SupSamples simulate_kind(const std::string& kind, std::uint64_t replicates,
                                std::uint64_t seed) {
    if (kind.rfind("gaussian:", 0) == 0) {
        const std::string path = kind.substr(9);
        Matrix cov;
        if (path.rfind("preset:se:", 0) == 0) {
            const auto rest = path.substr(10);
            const auto colon = rest.find(':');
            cov = se_kernel_cov(std::stoul(rest.substr(0, colon)),
                                std::stod(rest.substr(colon + 1)));
        } else {
            cov = matrix_from_csv(path);
        }
        return gaussian_suprema(cov, replicates, seed);
    }
    if (kind.rfind("exampleA:", 0) == 0)
        return example_a_suprema(std::stoul(kind.substr(9)), replicates, seed);
    if (kind.rfind("polymart:", 0) == 0) {
        const auto rest = kind.substr(9);
        const auto comma = rest.find(',');
        if (comma == std::string::npos) throw ConfigError("simulate: polymart:<d>,<n>");
        const int d = std::stoi(rest.substr(0, comma));
        const std::uint64_t n = std::stoull(rest.substr(comma + 1));
        return poly_martingale_normalized_suprema(d, static_cast<std::uint64_t>(std::max(1, d)), n,
                                                  replicates, seed);
    }
    if (kind.rfind("sum:", 0) == 0) {
        const auto rest = kind.substr(4);
        const auto comma = rest.rfind(',');
        if (comma == std::string::npos) throw ConfigError("simulate: sum:<base>,<n>");
        const std::string base = rest.substr(0, comma);
        const std::size_t n = std::stoul(rest.substr(comma + 1));
        if (base.rfind("rademacher:", 0) == 0)
            return rademacher_sum_suprema(std::stoul(base.substr(11)), n, replicates, seed);
        if (base.rfind("exampleA:", 0) == 0)
            return example_a_sum_suprema(std::stoul(base.substr(9)), n, replicates, seed);
        throw ConfigError("simulate: unknown sum base '" + base + "'");
    }
    throw ConfigError("simulate: unknown kind '" + kind + "'");
}

inline std::string tail_to_csv(const EmpiricalTail& t) {
    std::string out = "u,count,p_hat,ci_lo,ci_hi\n";
    for (std::size_t i = 0; i < t.u_grid.size(); ++i) {
        out += format_double(t.u_grid[i]) + "," + std::to_string(t.count[i]) + "," +
               format_double(t.p_hat[i]) + "," + format_double(t.ci_lo[i]) + "," +
               format_double(t.ci_hi[i]) + "\n";
    }
    return out;
}

inline SimulateResult run_simulate(const std::string& kind, std::uint64_t replicates,
                                   std::uint64_t seed, const std::vector<double>& u_grid,
                                   const std::string& out_dir, const std::string& name) {
    if (replicates == 0) throw ConfigError("simulate: replicates must be positive");
    const SupSamples sups = simulate_kind(kind, replicates, seed);
    SimulateResult res;
    res.tail = empirical_tail(sups, u_grid);
    std::filesystem::create_directories(out_dir);
    res.csv_path = out_dir + "/" + name + "_tail.csv";
    {
        std::ofstream out(res.csv_path);
        out << tail_to_csv(res.tail);
    }
    res.sup_path = out_dir + "/" + name + "_sup.bin";
    write_sup_file(res.sup_path, sups.sup);
    return res;
}

// ---------------------------------------------------------------------------
// verify runs

struct VerifyRow {
    double u = 0.0;
    double bound = 0.0;
    double ci_hi = 0.0;
    double log_ratio = 0.0;
    bool dominated = false;
    bool checked = false;  // inside the validity range (u >= u0)
};

struct VerifyResult {
    std::vector<VerifyRow> rows;
    bool pass = false;
    bool empty_after_filter = false;
};

struct ParsedBoundRow {
    double u, C, bound;
    bool below_u0;
};

inline std::vector<ParsedBoundRow> parse_bound_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("verify: cannot open bound report " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("u,C,N,", 0) != 0)
        throw ConfigError("verify: " + path + " is not a bound report");
    std::vector<ParsedBoundRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 7) throw ConfigError("verify: malformed bound row '" + line + "'");
        rows.push_back({std::stod(cells[0]), std::stod(cells[1]), std::stod(cells[5]),
                        cells[6].find("below_u0") != std::string::npos});
    }
    return rows;
}

struct ParsedTailRow {
    double u, ci_hi;
};

inline std::vector<ParsedTailRow> parse_tail_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("verify: cannot open tail estimate " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("u,count,", 0) != 0)
        throw ConfigError("verify: " + path + " is not a tail estimate");
    std::vector<ParsedTailRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 5) throw ConfigError("verify: malformed tail row '" + line + "'");
        rows.push_back({std::stod(cells[0]), std::stod(cells[4])});
    }
    return rows;
}

/// Per-threshold dominance of the optimized (smallest valid) bound over the
/// upper confidence limit. The u grids must match exactly; pass requires
/// dominance at every threshold inside the validity range, and at least one
/// such threshold.
inline VerifyResult verify_dominance(const std::vector<ParsedBoundRow>& bound_rows,
                                     const std::vector<ParsedTailRow>& tail_rows) {
    std::vector<double> bound_us;
    for (const auto& r : bound_rows) bound_us.push_back(r.u);
    std::sort(bound_us.begin(), bound_us.end());
    bound_us.erase(std::unique(bound_us.begin(), bound_us.end()), bound_us.end());
    std::vector<double> tail_us;
    for (const auto& r : tail_rows) tail_us.push_back(r.u);
    if (bound_us != tail_us)
        throw ConfigError("verify: the bound and tail u grids do not match exactly");

    VerifyResult res;
    for (const auto& t : tail_rows) {
        const ParsedBoundRow* best = nullptr;
        for (const auto& b : bound_rows) {
            if (b.u != t.u || b.below_u0) continue;
            if (!best || b.bound < best->bound) best = &b;
        }
        bool checked = best != nullptr;
        if (!best) {  // every constant is outside its validity range here
            for (const auto& b : bound_rows) {
                if (b.u != t.u) continue;
                if (!best || b.bound < best->bound) best = &b;
            }
        }
        VerifyRow row;
        row.u = t.u;
        row.bound = best->bound;
        row.ci_hi = t.ci_hi;
        row.dominated = best->bound >= t.ci_hi;
        row.log_ratio = std::log(best->bound / std::max(t.ci_hi, 1e-300));
        row.checked = checked;
        res.rows.push_back(row);
    }
    std::size_t checked_count = 0;
    bool all = true;
    for (const auto& r : res.rows) {
        if (!r.checked) continue;
        ++checked_count;
        all = all && r.dominated;
    }
    res.empty_after_filter = (checked_count == 0);
    res.pass = !res.empty_after_filter && all;
    return res;
}

inline std::string verify_to_csv(const VerifyResult& v) {
    std::string out = "u,bound,ci_hi,dominated,log_ratio,checked\n";
    for (const auto& r : v.rows) {
        out += format_double(r.u) + "," + format_double(r.bound) + "," + format_double(r.ci_hi) +
               "," + (r.dominated ? "1" : "0") + "," + format_double(r.log_ratio) + "," +
               (r.checked ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace chainbound
