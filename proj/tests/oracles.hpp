// Test-only oracles, independent of the library code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "kgbias/classifier.hpp"
#include "kgbias/embedding.hpp"
#include "kgbias/kg.hpp"
#include "kgbias/rng.hpp"

namespace oracles {

// Central finite differences of the score w.r.t. each head coordinate. Only
// uses kgbias::score_with_head, never the analytic gradient.
inline std::vector<double> fd_grad_head(const kgbias::EmbeddingSet& emb, kgbias::EntityId h,
                                        kgbias::RelationId r, kgbias::EntityId t,
                                        double step = 1e-6) {
    const auto head = emb.entity(h);
    std::vector<double> x(head.begin(), head.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + step;
        const double up = kgbias::score_with_head(emb, x, r, t);
        x[i] = keep - step;
        const double down = kgbias::score_with_head(emb, x, r, t);
        x[i] = keep;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

// Exact rational value num/den.
struct Fraction {
    long long num = 0;
    long long den = 1;

    friend bool operator==(const Fraction& a, const Fraction& b) {
        return a.num * b.den == b.num * a.den;  // counts stay tiny, no overflow
    }
};

struct CountingTerm {
    Fraction p_in;
    Fraction p_out;
    double value() const {
        return std::abs(static_cast<double>(p_in.num) / static_cast<double>(p_in.den) -
                        static_cast<double>(p_out.num) / static_cast<double>(p_out.den));
    }
};

struct CountingResult {
    bool undefined = false;
    std::vector<CountingTerm> per_label;
    double total() const {
        double s = 0;
        for (const auto& t : per_label) s += t.value();
        return s;
    }
};

// Brute-force DPD by explicit enumeration of rows per group.
inline CountingResult counting_dpd(const kgbias::PredictionTable& table,
                                   const kgbias::SensitiveGrouping& g) {
    const std::set<kgbias::EntityId> in(g.in_group.begin(), g.in_group.end());
    const std::set<kgbias::EntityId> out(g.out_group.begin(), g.out_group.end());
    long long n_in = 0, n_out = 0;
    for (const auto& row : table.rows) {
        if (in.count(row.entity)) ++n_in;
        if (out.count(row.entity)) ++n_out;
    }
    CountingResult res;
    if (n_in == 0 || n_out == 0) {
        res.undefined = true;
        return res;
    }
    for (int a = 0; a < static_cast<int>(table.classes.size()); ++a) {
        long long c_in = 0, c_out = 0;
        for (const auto& row : table.rows) {
            if (row.predicted != a) continue;
            if (in.count(row.entity)) ++c_in;
            if (out.count(row.entity)) ++c_out;
        }
        res.per_label.push_back(CountingTerm{{c_in, n_in}, {c_out, n_out}});
    }
    return res;
}

// Brute-force PPD; labels with empty conditional support contribute 0/1.
inline CountingResult counting_ppd(const kgbias::PredictionTable& table,
                                   const kgbias::SensitiveGrouping& g) {
    const std::set<kgbias::EntityId> in(g.in_group.begin(), g.in_group.end());
    const std::set<kgbias::EntityId> out(g.out_group.begin(), g.out_group.end());
    long long n_in = 0, n_out = 0;
    for (const auto& row : table.rows) {
        if (in.count(row.entity)) ++n_in;
        if (out.count(row.entity)) ++n_out;
    }
    CountingResult res;
    if (n_in == 0 || n_out == 0) {
        res.undefined = true;
        return res;
    }
    for (int a = 0; a < static_cast<int>(table.classes.size()); ++a) {
        long long hit_in = 0, sup_in = 0, hit_out = 0, sup_out = 0;
        for (const auto& row : table.rows) {
            if (row.truth != a) continue;
            if (in.count(row.entity)) {
                ++sup_in;
                if (row.predicted == a) ++hit_in;
            }
            if (out.count(row.entity)) {
                ++sup_out;
                if (row.predicted == a) ++hit_out;
            }
        }
        if (sup_in == 0 || sup_out == 0)
            res.per_label.push_back(CountingTerm{{0, 1}, {0, 1}});
        else
            res.per_label.push_back(CountingTerm{{hit_in, sup_in}, {hit_out, sup_out}});
    }
    return res;
}

struct RandomCase {
    kgbias::PredictionTable table;
    kgbias::SensitiveGrouping grouping;
};

// Random prediction table (<=50 rows, <=4 labels) plus a random grouping that
// never leaves either group empty within the table.
inline RandomCase random_case(kgbias::Rng& rng) {
    RandomCase rc;
    const int labels = 2 + static_cast<int>(rng.below(3));  // 2..4
    const int rows = 2 + static_cast<int>(rng.below(49));   // 2..50
    for (int c = 0; c < labels; ++c) rc.table.classes.push_back("L" + std::to_string(c));
    for (int i = 0; i < rows; ++i)
        rc.table.rows.push_back(kgbias::PredictionRow{static_cast<kgbias::EntityId>(i),
                                                      static_cast<int>(rng.below(labels)),
                                                      static_cast<int>(rng.below(labels))});
    // membership: 0 neither, 1 in, 2 out; force one of each group
    while (true) {
        std::vector<kgbias::EntityId> in, out;
        for (int i = 0; i < rows; ++i) {
            const auto m = rng.below(3);
            if (m == 1) in.push_back(static_cast<kgbias::EntityId>(i));
            if (m == 2) out.push_back(static_cast<kgbias::EntityId>(i));
        }
        if (!in.empty() && !out.empty()) {
            rc.grouping.in_group = std::move(in);
            rc.grouping.out_group = std::move(out);
            break;
        }
    }
    return rc;
}

}  // namespace oracles
