#include "ecgicd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ecgicd/csv.hpp"
#include "ecgicd/rng.hpp"
#include "ecgicd/threadpool.hpp"

namespace ecgicd::eval {

using nlohmann::json;

std::optional<double> auroc_weighted(const std::vector<double>& scores,
                                     const std::vector<std::uint8_t>& labels,
                                     const std::vector<std::uint32_t>& order,
                                     const std::vector<std::uint32_t>& weight) {
    // Walk ascending tie groups: strictly-greater pairs contribute the
    // negatives seen so far, within-group pairs get half credit.
    double n_pos = 0, n_neg = 0, numer = 0, cum_neg = 0;
    std::size_t i = 0;
    const std::size_t n = order.size();
    while (i < n) {
        const double s = scores[order[i]];
        double pos_g = 0, neg_g = 0;
        std::size_t j = i;
        for (; j < n && scores[order[j]] == s; ++j) {
            const double w = weight[order[j]];
            if (labels[order[j]]) {
                pos_g += w;
            } else {
                neg_g += w;
            }
        }
        numer += pos_g * cum_neg + 0.5 * pos_g * neg_g;
        cum_neg += neg_g;
        n_pos += pos_g;
        n_neg += neg_g;
        i = j;
    }
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    return numer / (n_pos * n_neg);
}

std::optional<double> auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) throw EvalError("auroc: length mismatch");
    if (scores.empty()) return std::nullopt;
    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&scores](std::uint32_t a, std::uint32_t b) { return scores[a] < scores[b]; });
    const std::vector<std::uint32_t> ones(scores.size(), 1u);
    return auroc_weighted(scores, labels, order, ones);
}

namespace {

struct LabelColumns {
    std::vector<std::vector<double>> scores;        // per label
    std::vector<std::vector<std::uint8_t>> labels;  // per label
    std::vector<std::vector<std::uint32_t>> order;  // per label, ascending by score
};

LabelColumns split_columns(const PredictionMatrix& p, const data::BitMatrix& y) {
    if (p.n != y.rows() || p.m != y.cols()) throw EvalError("prediction/label shape mismatch");
    LabelColumns cols;
    cols.scores.resize(p.m);
    cols.labels.resize(p.m);
    cols.order.resize(p.m);
    for (std::size_t j = 0; j < p.m; ++j) {
        auto& s = cols.scores[j];
        auto& l = cols.labels[j];
        s.resize(p.n);
        l.resize(p.n);
        for (std::size_t i = 0; i < p.n; ++i) {
            const double v = p.at(i, j);
            if (!std::isfinite(v)) throw EvalError("non-finite score");
            s[i] = v;
            l[i] = y.get(i, j) ? 1 : 0;
        }
        auto& ord = cols.order[j];
        ord.resize(p.n);
        std::iota(ord.begin(), ord.end(), 0u);
        std::sort(ord.begin(), ord.end(), [&s](std::uint32_t a, std::uint32_t b) { return s[a] < s[b]; });
    }
    return cols;
}

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double mean_defined(const std::vector<double>& values) {
    double s = 0;
    std::size_t n = 0;
    for (const double v : values) {
        if (!std::isnan(v)) {
            s += v;
            ++n;
        }
    }
    return n == 0 ? kNan : s / static_cast<double>(n);
}

// Type-7 (linear interpolation) quantile of the finite entries.
double quantile(std::vector<double> v, double q) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
    if (v.empty()) return kNan;
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    const double frac = h - static_cast<double>(lo);
    return v[lo] + (v[lo + 1] - v[lo]) * frac;
}

}  // namespace

MacroResult macro_auroc(const PredictionMatrix& p, const data::BitMatrix& y) {
    const LabelColumns cols = split_columns(p, y);
    MacroResult out;
    double sum = 0;
    std::size_t defined = 0;
    const std::vector<std::uint32_t> ones(p.n, 1u);
    for (std::size_t j = 0; j < p.m; ++j) {
        const auto a = auroc_weighted(cols.scores[j], cols.labels[j], cols.order[j], ones);
        if (a) {
            sum += *a;
            ++defined;
        } else {
            out.skipped.push_back(j);
        }
    }
    if (defined == 0) throw EvalError("macro AUROC undefined: every label is single-class");
    out.value = sum / static_cast<double>(defined);
    return out;
}

Resampler default_resampler(std::uint64_t seed, std::size_t n) {
    return [seed, n](std::uint32_t iteration, std::vector<std::uint32_t>& weight) {
        weight.assign(n, 0u);
        DetRng rng = DetRng::stream(seed, iteration);
        for (std::size_t k = 0; k < n; ++k) ++weight[rng.below(n)];
    };
}

EvalReport bootstrap_ci(const PredictionMatrix& p, const data::BitMatrix& y, std::uint32_t n_boot,
                        double alpha, std::uint64_t seed, unsigned threads,
                        const Resampler* resampler) {
    if (n_boot < 1) throw EvalError("n_boot must be >= 1");
    const LabelColumns cols = split_columns(p, y);
    const std::vector<std::uint32_t> ones(p.n, 1u);

    EvalReport report;
    report.seed = seed;
    report.n_boot = n_boot;
    report.alpha = alpha;

    // Point estimates, prevalence, positives.
    std::vector<double> point(p.m, kNan);
    for (std::size_t j = 0; j < p.m; ++j) {
        const auto a = auroc_weighted(cols.scores[j], cols.labels[j], cols.order[j], ones);
        if (a) point[j] = *a;
    }

    // Bootstrap distribution: boot[it * m + j].
    const Resampler sampler = resampler != nullptr ? *resampler : default_resampler(seed, p.n);
    std::vector<double> boot(static_cast<std::size_t>(n_boot) * p.m, kNan);
    std::vector<double> boot_macro(n_boot, kNan);
    parallel_for(n_boot, threads, [&](std::size_t it) {
        std::vector<std::uint32_t> weight;
        sampler(static_cast<std::uint32_t>(it), weight);
        double sum = 0;
        std::size_t defined = 0;
        for (std::size_t j = 0; j < p.m; ++j) {
            const auto a = auroc_weighted(cols.scores[j], cols.labels[j], cols.order[j], weight);
            if (a) {
                boot[it * p.m + j] = *a;
                sum += *a;
                ++defined;
            }
        }
        if (defined > 0) boot_macro[it] = sum / static_cast<double>(defined);
    });

    const double q_lo = alpha / 2.0;
    const double q_hi = 1.0 - alpha / 2.0;
    for (std::size_t j = 0; j < p.m; ++j) {
        LabelReport lr;
        lr.code = j < p.label_set.codes.size() ? p.label_set.codes[j].text : std::to_string(j);
        std::uint64_t n_pos = 0;
        for (const auto l : cols.labels[j]) n_pos += l;
        lr.n_pos = n_pos;
        lr.prevalence = p.n == 0 ? 0.0 : static_cast<double>(n_pos) / static_cast<double>(p.n);
        if (std::isnan(point[j])) {
            report.skipped.push_back(lr.code);
        } else {
            std::vector<double> dist(n_boot);
            for (std::uint32_t it = 0; it < n_boot; ++it) dist[it] = boot[static_cast<std::size_t>(it) * p.m + j];
            Interval ci;
            ci.point = point[j];
            ci.low = quantile(dist, q_lo);
            ci.high = quantile(dist, q_hi);
            lr.auroc = ci;
        }
        report.labels.push_back(std::move(lr));
    }
    report.macro.point = mean_defined(point);
    if (std::isnan(report.macro.point)) throw EvalError("macro AUROC undefined: every label is single-class");
    report.macro.low = quantile(boot_macro, q_lo);
    report.macro.high = quantile(boot_macro, q_hi);
    return report;
}

PairedReport paired_significance(const PredictionMatrix& a, const PredictionMatrix& b,
                                 const data::BitMatrix& y, std::uint32_t n_boot, double alpha,
                                 std::uint64_t seed, unsigned threads) {
    if (a.n != b.n || a.m != b.m) throw EvalError("paired prediction matrices: shape mismatch");
    const LabelColumns ca = split_columns(a, y);
    const LabelColumns cb = split_columns(b, y);
    const std::vector<std::uint32_t> ones(a.n, 1u);

    PairedReport report;
    std::vector<double> point_diff(a.m, kNan);
    for (std::size_t j = 0; j < a.m; ++j) {
        const auto pa = auroc_weighted(ca.scores[j], ca.labels[j], ca.order[j], ones);
        const auto pb = auroc_weighted(cb.scores[j], cb.labels[j], cb.order[j], ones);
        if (pa && pb) point_diff[j] = *pa - *pb;
    }

    const Resampler sampler = default_resampler(seed, a.n);
    std::vector<double> boot(static_cast<std::size_t>(n_boot) * a.m, kNan);
    std::vector<double> boot_macro(n_boot, kNan);
    parallel_for(n_boot, threads, [&](std::size_t it) {
        std::vector<std::uint32_t> weight;
        sampler(static_cast<std::uint32_t>(it), weight);
        double sum_a = 0, sum_b = 0;
        std::size_t defined = 0;
        for (std::size_t j = 0; j < a.m; ++j) {
            const auto pa = auroc_weighted(ca.scores[j], ca.labels[j], ca.order[j], weight);
            const auto pb = auroc_weighted(cb.scores[j], cb.labels[j], cb.order[j], weight);
            if (pa && pb) {
                boot[it * a.m + j] = *pa - *pb;
                sum_a += *pa;
                sum_b += *pb;
                ++defined;
            }
        }
        if (defined > 0) boot_macro[it] = (sum_a - sum_b) / static_cast<double>(defined);
    });

    const double q_lo = alpha / 2.0;
    const double q_hi = 1.0 - alpha / 2.0;
    for (std::size_t j = 0; j < a.m; ++j) {
        if (std::isnan(point_diff[j])) continue;  // single-class labels carry no comparison
        PairedLabelResult r;
        r.code = j < a.label_set.codes.size() ? a.label_set.codes[j].text : std::to_string(j);
        r.diff = point_diff[j];
        std::vector<double> dist(n_boot);
        for (std::uint32_t it = 0; it < n_boot; ++it) dist[it] = boot[static_cast<std::size_t>(it) * a.m + j];
        r.low = quantile(dist, q_lo);
        r.high = quantile(dist, q_hi);
        r.significant = !(r.low <= 0.0 && 0.0 <= r.high);
        if (r.significant && r.diff > 0) ++report.a_better;
        if (r.significant && r.diff < 0) ++report.b_better;
        report.labels.push_back(std::move(r));
    }
    report.macro_diff.point = mean_defined(point_diff);
    report.macro_diff.low = quantile(boot_macro, q_lo);
    report.macro_diff.high = quantile(boot_macro, q_hi);
    report.macro_significant =
        !(report.macro_diff.low <= 0.0 && 0.0 <= report.macro_diff.high);
    return report;
}

std::vector<CoverageRow> coverage_table(const EvalReport& report, double threshold,
                                        const std::map<std::string, std::string>* descriptions) {
    std::map<std::string, CoverageRow> groups;
    for (const auto& lr : report.labels) {
        const std::string code3 = lr.code.substr(0, 3);
        auto [it, inserted] = groups.try_emplace(code3);
        CoverageRow& row = it->second;
        if (inserted) {
            row.code3 = code3;
            row.chapter = icd::chapter_of({code3, icd::IcdVersion::Icd10});
            if (descriptions != nullptr) {
                auto d = descriptions->find(code3);
                if (d != descriptions->end()) row.description = d->second;
            }
        }
        ++row.total;
        if (lr.auroc && lr.auroc->point > threshold) ++row.covered;
        if (lr.code == code3) row.prevalence = lr.prevalence;
    }
    std::vector<CoverageRow> rows;
    rows.reserve(groups.size());
    for (auto& [code3, row] : groups) rows.push_back(std::move(row));
    std::sort(rows.begin(), rows.end(), [](const CoverageRow& x, const CoverageRow& y) {
        if (x.chapter != y.chapter) return static_cast<int>(x.chapter) < static_cast<int>(y.chapter);
        if (x.prevalence != y.prevalence) return x.prevalence > y.prevalence;
        return x.code3 < y.code3;
    });
    return rows;
}

std::vector<double> mcc_matrix(const data::BitMatrix& y) {
    const std::size_t m = y.cols();
    const double n = static_cast<double>(y.rows());
    std::vector<double> out(m * m, kNan);
    std::vector<double> ones(m);
    for (std::size_t j = 0; j < m; ++j) ones[j] = static_cast<double>(y.column_count(j));
    for (std::size_t a = 0; a < m; ++a) {
        if (ones[a] == 0 || ones[a] == n) continue;  // degenerate marginal
        for (std::size_t b = a; b < m; ++b) {
            if (ones[b] == 0 || ones[b] == n) continue;
            const double n11 = static_cast<double>(y.column_and_count(a, b));
            const double n10 = ones[a] - n11;
            const double n01 = ones[b] - n11;
            const double n00 = n - n11 - n10 - n01;
            const double denom = std::sqrt(ones[a] * (n - ones[a]) * ones[b] * (n - ones[b]));
            const double v = (n11 * n00 - n10 * n01) / denom;
            out[a * m + b] = v;
            out[b * m + a] = v;
        }
    }
    return out;
}

std::vector<double> prevalence(const data::BitMatrix& y) {
    std::vector<double> out(y.cols(), 0.0);
    if (y.rows() == 0) return out;
    for (std::size_t j = 0; j < y.cols(); ++j)
        out[j] = static_cast<double>(y.column_count(j)) / static_cast<double>(y.rows());
    return out;
}

std::vector<ChapterAuroc> chapter_macro(const EvalReport& report) {
    std::map<icd::Chapter, std::pair<double, std::size_t>> acc;
    for (const auto& lr : report.labels) {
        if (!lr.auroc) continue;
        const auto ch = icd::chapter_of({lr.code.substr(0, 3), icd::IcdVersion::Icd10});
        auto& [sum, count] = acc[ch];
        sum += lr.auroc->point;
        ++count;
    }
    std::vector<ChapterAuroc> rows;
    for (const auto& [ch, sc] : acc)
        rows.push_back({ch, sc.first / static_cast<double>(sc.second), sc.second});
    return rows;
}

// ---------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------

void EvalReport::save_json(const std::string& path) const {
    json j;
    j["seed"] = seed;
    j["n_boot"] = n_boot;
    j["alpha"] = alpha;
    j["macro"] = {{"auroc", macro.point}, {"ci_low", macro.low}, {"ci_high", macro.high}};
    j["skipped"] = skipped;
    json labels_json = json::array();
    for (const auto& lr : labels) {
        json e = {{"code", lr.code}, {"prevalence", lr.prevalence}, {"n_pos", lr.n_pos}};
        if (lr.auroc) {
            e["auroc"] = lr.auroc->point;
            e["ci_low"] = lr.auroc->low;
            e["ci_high"] = lr.auroc->high;
        }
        labels_json.push_back(std::move(e));
    }
    j["labels"] = std::move(labels_json);
    std::ofstream out(path);
    if (!out) throw EvalError("cannot write " + path);
    out << j.dump(1, '\t') << '\n';
}

void EvalReport::save_csv(const std::string& path,
                          const std::map<std::string, std::string>* descriptions) const {
    std::ofstream out(path);
    if (!out) throw EvalError("cannot write " + path);
    out << "code,description,auroc,ci_low,ci_high,prevalence,n_pos\n";
    out.precision(10);
    for (const auto& lr : labels) {
        std::string desc;
        if (descriptions != nullptr) {
            auto it = descriptions->find(lr.code);
            if (it != descriptions->end()) desc = it->second;
        }
        if (desc.find(',') != std::string::npos || desc.find('"') != std::string::npos) {
            std::string quoted = "\"";
            for (char c : desc) {
                if (c == '"') quoted += '"';
                quoted += c;
            }
            quoted += '"';
            desc = std::move(quoted);
        }
        out << lr.code << ',' << desc << ',';
        if (lr.auroc) out << lr.auroc->point << ',' << lr.auroc->low << ',' << lr.auroc->high;
        else out << ",,";
        out << ',' << lr.prevalence << ',' << lr.n_pos << '\n';
    }
}

EvalReport EvalReport::load_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const std::size_t c_code = t.column("code");
    const std::size_t c_auroc = t.column("auroc");
    std::optional<std::size_t> c_low, c_high, c_prev, c_npos;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == "ci_low") c_low = i;
        if (t.header[i] == "ci_high") c_high = i;
        if (t.header[i] == "prevalence") c_prev = i;
        if (t.header[i] == "n_pos") c_npos = i;
    }
    EvalReport report;
    double macro_sum = 0;
    std::size_t macro_n = 0;
    for (const auto& r : t.rows) {
        LabelReport lr;
        lr.code = r[c_code];
        if (!r[c_auroc].empty()) {
            Interval ci;
            ci.point = std::stod(r[c_auroc]);
            ci.low = c_low && !r[*c_low].empty() ? std::stod(r[*c_low]) : ci.point;
            ci.high = c_high && !r[*c_high].empty() ? std::stod(r[*c_high]) : ci.point;
            lr.auroc = ci;
            macro_sum += ci.point;
            ++macro_n;
        } else {
            report.skipped.push_back(lr.code);
        }
        if (c_prev && !r[*c_prev].empty()) lr.prevalence = std::stod(r[*c_prev]);
        if (c_npos && !r[*c_npos].empty()) lr.n_pos = std::stoull(r[*c_npos]);
        report.labels.push_back(std::move(lr));
    }
    if (macro_n > 0) report.macro.point = macro_sum / static_cast<double>(macro_n);
    return report;
}

void PairedReport::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw EvalError("cannot write " + path);
    out.precision(10);
    out << "code,diff,ci_low,ci_high,significant\n";
    out << "MACRO," << macro_diff.point << ',' << macro_diff.low << ',' << macro_diff.high << ','
        << (macro_significant ? 1 : 0) << '\n';
    for (const auto& r : labels)
        out << r.code << ',' << r.diff << ',' << r.low << ',' << r.high << ','
            << (r.significant ? 1 : 0) << '\n';
}

void save_coverage_csv(const std::string& path, const std::vector<CoverageRow>& rows) {
    std::ofstream out(path);
    if (!out) throw EvalError("cannot write " + path);
    out << "chapter,code,covered,total,prevalence,description\n";
    out.precision(10);
    for (const auto& r : rows) {
        out << icd::to_roman(r.chapter) << ',' << r.code3 << ',' << r.covered << ',' << r.total
            << ',' << r.prevalence << ',' << r.description << '\n';
    }
}

void save_mcc_csv(const std::string& path, const std::vector<double>& mcc, const icd::LabelSet& labels) {
    const std::size_t m = labels.size();
    if (mcc.size() != m * m) throw EvalError("mcc matrix size mismatch");
    std::ofstream out(path);
    if (!out) throw EvalError("cannot write " + path);
    out.precision(10);
    out << "code";
    for (const auto& c : labels.codes) out << ',' << c.text;
    out << '\n';
    for (std::size_t a = 0; a < m; ++a) {
        out << labels.codes[a].text;
        for (std::size_t b = 0; b < m; ++b) {
            out << ',';
            if (!std::isnan(mcc[a * m + b])) out << mcc[a * m + b];
        }
        out << '\n';
    }
}

void save_chapter_csv(const std::string& path, const std::vector<ChapterAuroc>& rows) {
    std::ofstream out(path);
    if (!out) throw EvalError("cannot write " + path);
    out.precision(10);
    out << "chapter,macro_auroc,n_labels\n";
    for (const auto& r : rows)
        out << icd::to_roman(r.chapter) << ',' << r.macro_auroc << ',' << r.n_labels << '\n';
}

}  // namespace ecgicd::eval
