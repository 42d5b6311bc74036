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

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainbound/common.hpp"
#include "chainbound/phi.hpp"

namespace chainbound {

inline nlohmann::json phi_to_json(const PhiFunction& phi) {
    nlohmann::json j;
    j["kind"] = to_string(phi.kind());
    if (phi.is_tabulated()) {
        j["lambda0"] = phi.lambda0();
        j["grid"] = phi.grid();
        j["values"] = phi.values();
    } else if (phi.kind() == PhiKind::PowerType) {
        j["p"] = phi.power_exponent();
        j["outer"] = phi.outer_scale();
        j["inner"] = phi.inner_scale();
    }
    return j;
}

inline PhiFunction phi_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "subgaussian") return PhiFunction::subgaussian();
    if (kind == "power") {
        PhiFunction f = PhiFunction::power_type(j.at("p").get<double>());
        const double outer = j.value("outer", 1.0);
        const double inner = j.value("inner", 1.0);
        if (outer != 1.0 || inner != 1.0) f = f.scaled(outer, inner);
        return f;
    }
    const PhiKind k = (kind == "natural") ? PhiKind::Natural : PhiKind::Custom;
    return PhiFunction::tabulated(k, j.at("grid").get<std::vector<double>>(),
                                  j.at("values").get<std::vector<double>>());
}

inline nlohmann::json conjugate_to_json(const ConjugateTable& t) {
    return {{"kind", "conjugate"},
            {"lambda0", t.slopes.empty() ? 0.0 : t.slopes.back()},
            {"grid", t.grid},
            {"values", t.values},
            {"slopes", t.slopes}};
}

inline ConjugateTable conjugate_from_json(const nlohmann::json& j) {
    ConjugateTable t;
    t.grid = j.at("grid").get<std::vector<double>>();
    t.values = j.at("values").get<std::vector<double>>();
    t.slopes = j.at("slopes").get<std::vector<double>>();
    return t;
}

/// Headerless CSV of doubles, one replicate per row.
inline Matrix matrix_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("matrix_from_csv: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw DomainError("matrix_from_csv: ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DomainError("matrix_from_csv: empty file " + path);
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
    return m;
}

inline void matrix_to_csv(const Matrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DomainError("matrix_to_csv: cannot open " + path);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c)
            out << (c ? "," : "") << format_double(m.at(r, c));
        out << "\n";
    }
}

}  // namespace chainbound
