#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "raoi/analytic.hpp"
#include "raoi/error.hpp"
#include "raoi/simulator.hpp"

namespace raoi::bench {

enum class Verdict { Match, Discrepant, NotInPaper };

inline std::string_view verdict_name(Verdict v) {
    switch (v) {
    case Verdict::Match: return "match";
    case Verdict::Discrepant: return "discrepant";
    case Verdict::NotInPaper: return "not-in-paper";
    }
    return "?";
}

inline Verdict parse_verdict(std::string_view s) {
    if (s == "match") return Verdict::Match;
    if (s == "discrepant") return Verdict::Discrepant;
    if (s == "not-in-paper") return Verdict::NotInPaper;
    throw DomainError("unknown verdict '" + std::string(s) + "'");
}

struct Tolerance {
    double rel_tol = 0.01;
    double z_max = 5.0;
};

/// match iff |analytic - sim| <= max(rel_tol |analytic|, z_max stderr).
inline Verdict judge(double analytic, double sim, double stderr_, const Tolerance& tol) {
    if (!std::isfinite(analytic) || !std::isfinite(sim)) return Verdict::Discrepant;
    const double allowed = std::max(tol.rel_tol * std::abs(analytic), tol.z_max * stderr_);
    return std::abs(analytic - sim) <= allowed ? Verdict::Match : Verdict::Discrepant;
}

/// Quadrature variants, first moments and the remaining closed forms decide
/// the verify exit status; printed and joint-law variants are reported only.
inline bool is_authoritative(std::string_view formula_id) {
    return !formula_id.empty() && !formula_id.ends_with("-printed") && !formula_id.ends_with("-joint");
}

inline std::vector<double> log_grid(double lo, double hi, int n) {
    if (n <= 0) return {};
    if (!(lo > 0.0) || !(hi >= lo)) throw DomainError("log grid needs 0 < lo <= hi");
    if (n == 1) return {lo};
    std::vector<double> g(static_cast<std::size_t>(n));
    const double step = std::log(hi / lo) / (n - 1);
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
    g.back() = hi;
    return g;
}

struct SweepSpec {
    std::vector<double> lambdas = log_grid(0.05, 50.0, 40);
    double mu = 1.0;
    std::vector<Discipline> disciplines = {Discipline::FcfsUnbounded, Discipline::PreemptiveDrop,
                                           Discipline::BlockingSingle, Discipline::ReplaceBuffer};
    std::vector<ServiceFamily> families = {ServiceFamily::Exponential, ServiceFamily::Deterministic};
    std::vector<AgeProcess> metrics = {AgeProcess::Gamma};
    std::vector<int> orders = {1};
    std::uint64_t n_packets = 1'000'000;
    std::uint64_t base_seed = 1;
    std::uint64_t warmup = 1'000;
    std::string grid_note = "log-spaced lambda in [0.05, 50], 40 points";

    void validate() const {
        if (lambdas.empty()) throw DomainError("empty lambda grid");
        for (double l : lambdas) {
            if (!(l > 0.0) || !std::isfinite(l)) throw DomainError("lambda grid values must be positive");
        }
        if (!(mu > 0.0) || !std::isfinite(mu)) throw DomainError("mu must be positive");
        if (disciplines.empty() || families.empty() || metrics.empty() || orders.empty()) {
            throw DomainError("sweep needs at least one discipline, service, metric and order");
        }
        for (int k : orders) {
            if (k != 1 && k != 2) throw DomainError("moment order must be 1 or 2");
        }
        for (auto m : metrics) {
            if (m == AgeProcess::DeltaT) throw DomainError("metric must be gamma or deltaR");
        }
        if (n_packets <= warmup) throw DomainError("packets must exceed warmup");
    }
};

/// One CSV row; absent fields serialize as empty cells.
struct Row {
    Discipline discipline = Discipline::PreemptiveDrop;
    ServiceFamily service = ServiceFamily::Exponential;
    double lambda = 0.0;
    double mu = 0.0;
    AgeProcess metric = AgeProcess::Gamma;
    int k = 1;
    std::optional<double> analytic_value;
    std::string formula_id;
    std::optional<double> sim_value;
    std::optional<double> sim_stderr;
    std::optional<std::uint64_t> n_packets;
    std::optional<std::uint64_t> seed;
    std::optional<double> z_score;
    Verdict verdict = Verdict::NotInPaper;

    bool operator==(const Row&) const = default;
};

inline constexpr std::string_view kCsvHeader =
    "discipline,service,lambda,mu,metric,k,analytic_value,formula_id,sim_value,sim_stderr,n_packets,seed,"
    "z_score,verdict";

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw StructuralError("bad number in csv: '" + std::string(s) + "'");
    }
    return v;
}

inline std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw StructuralError("bad integer in csv: '" + std::string(s) + "'");
    }
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(sep, pos);
        out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

}  // namespace detail

inline void write_csv(std::ostream& os, const std::vector<Row>& rows, std::string_view comment = {}) {
    if (!comment.empty()) os << "# " << comment << '\n';
    os << kCsvHeader << '\n';
    const auto opt = [](const auto& v) { return v ? detail::fmt(static_cast<double>(*v)) : std::string(); };
    const auto opt_u = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string(); };
    for (const auto& r : rows) {
        os << discipline_name(r.discipline) << ',' << family_name(r.service) << ',' << detail::fmt(r.lambda) << ','
           << detail::fmt(r.mu) << ',' << process_name(r.metric) << ',' << r.k << ',' << opt(r.analytic_value) << ','
           << r.formula_id << ',' << opt(r.sim_value) << ',' << opt(r.sim_stderr) << ',' << opt_u(r.n_packets)
           << ',' << opt_u(r.seed) << ',' << opt(r.z_score) << ',' << verdict_name(r.verdict) << '\n';
    }
}

struct CsvFile {
    std::vector<std::string> comments;
    std::vector<Row> rows;
};

inline CsvFile read_csv(std::istream& is) {
    CsvFile out;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            out.comments.push_back(line.size() > 2 ? line.substr(2) : std::string());
            continue;
        }
        if (!header) {
            if (line != kCsvHeader) throw StructuralError("unexpected csv header");
            header = true;
            continue;
        }
        const auto f = detail::split(line, ',');
        if (f.size() != 14) throw StructuralError("csv row needs 14 fields: " + line);
        const auto od = [](std::string_view s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return detail::parse_double(s);
        };
        const auto ou = [](std::string_view s) -> std::optional<std::uint64_t> {
            if (s.empty()) return std::nullopt;
            return detail::parse_u64(s);
        };
        Row r;
        r.discipline = parse_discipline(f[0]);
        r.service = parse_family(f[1]);
        r.lambda = detail::parse_double(f[2]);
        r.mu = detail::parse_double(f[3]);
        r.metric = parse_process(f[4]);
        r.k = static_cast<int>(detail::parse_u64(f[5]));
        r.analytic_value = od(f[6]);
        r.formula_id = std::string(f[7]);
        r.sim_value = od(f[8]);
        r.sim_stderr = od(f[9]);
        r.n_packets = ou(f[10]);
        r.seed = ou(f[11]);
        r.z_score = od(f[12]);
        r.verdict = parse_verdict(f[13]);
        out.rows.push_back(std::move(r));
    }
    if (!header) throw StructuralError("csv has no header");
    return out;
}

/// Runs fn(i) for i in [0, n) on a small thread pool. Each index writes only
/// its own slot, so the output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, const Fn& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n && !failed; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        if (!failed.exchange(true)) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

struct Point {
    std::size_t index = 0;  // position in the full enumeration, skipped points included
    Discipline discipline = Discipline::PreemptiveDrop;
    ServiceFamily family = ServiceFamily::Exponential;
    double lambda = 0.0;
};

/// Grid points in discipline, service, lambda order. FCFS points with
/// lambda >= mu are dropped with a notice; they keep their index so the
/// remaining seeds do not move.
inline std::vector<Point> enumerate_points(const SweepSpec& spec, std::ostream* notices = nullptr) {
    std::vector<Point> pts;
    std::size_t index = 0;
    for (auto d : spec.disciplines) {
        for (auto f : spec.families) {
            for (double l : spec.lambdas) {
                const std::size_t i = index++;
                if (d == Discipline::FcfsUnbounded && !(l < spec.mu)) {
                    if (notices) {
                        *notices << "skipping fcfs/" << family_name(f) << " at lambda=" << detail::fmt(l)
                                 << " (unstable for lambda >= mu)\n";
                    }
                    continue;
                }
                pts.push_back({i, d, f, l});
            }
        }
    }
    return pts;
}

/// Formula variants evaluated for one (discipline, service, metric, order).
inline std::vector<AreaMethod> area_variants(Discipline d, ServiceFamily f, AgeProcess m, int k) {
    if (m != AgeProcess::Gamma || k != 2) return {AreaMethod::Quadrature};
    if (d == Discipline::BlockingSingle) return {AreaMethod::Printed, AreaMethod::Quadrature, AreaMethod::JointLaw};
    if (d == Discipline::ReplaceBuffer) {
        if (f == ServiceFamily::Exponential) return {AreaMethod::Printed, AreaMethod::Quadrature, AreaMethod::JointLaw};
        return {AreaMethod::Printed, AreaMethod::Quadrature};
    }
    return {AreaMethod::Quadrature};
}

inline const MomentEstimate& pick(const MomentSet& m, AgeProcess p, int k) {
    if (p == AgeProcess::Gamma) return k == 1 ? m.gamma1 : m.gamma2;
    return k == 1 ? m.delta_r1 : m.delta_r2;
}

/// Simulates one point and emits a row per metric, order and formula variant.
inline std::vector<Row> evaluate_point(const SweepSpec& spec, const Point& p, const Tolerance& tol) {
    SimConfig cfg;
    cfg.arrival_rate = p.lambda;
    cfg.service = ServiceModel(p.family, spec.mu);
    cfg.discipline = p.discipline;
    cfg.n_packets = spec.n_packets;
    cfg.warmup = spec.warmup;
    cfg.seed = spec.base_seed + p.index;
    const SimSummary sim = estimate(cfg);

    std::vector<Row> rows;
    for (auto metric : spec.metrics) {
        for (int k : spec.orders) {
            const MomentEstimate& est = pick(sim.moments, metric, k);
            const AnalyticQuery q{p.discipline, cfg.service, p.lambda, metric, k};
            for (auto method : area_variants(p.discipline, p.family, metric, k)) {
                Row r;
                r.discipline = p.discipline;
                r.service = p.family;
                r.lambda = p.lambda;
                r.mu = spec.mu;
                r.metric = metric;
                r.k = k;
                r.sim_value = est.value;
                r.sim_stderr = est.std_error;
                r.n_packets = spec.n_packets;
                r.seed = cfg.seed;
                try {
                    AnalyticOptions opt;
                    opt.area = method;
                    if (p.discipline == Discipline::ReplaceBuffer) opt.delta_r2 = sim.moments.delta_r2.value;
                    const AnalyticResult a = evaluate(q, opt);
                    r.analytic_value = a.value;
                    r.formula_id = a.formula_id;
                    if (est.std_error > 0.0) r.z_score = (est.value - a.value) / est.std_error;
                    r.verdict = judge(a.value, est.value, est.std_error, tol);
                } catch (const NotInCatalogError&) {
                    r.verdict = Verdict::NotInPaper;
                }
                rows.push_back(std::move(r));
            }
        }
    }
    return rows;
}

inline std::vector<Row> run_sweep(const SweepSpec& spec, const Tolerance& tol = {}, unsigned threads = 0,
                                  std::ostream* notices = nullptr) {
    spec.validate();
    const auto pts = enumerate_points(spec, notices);
    std::vector<std::vector<Row>> per_point(pts.size());
    parallel_for(pts.size(), threads, [&](std::size_t i) { per_point[i] = evaluate_point(spec, pts[i], tol); });
    std::vector<Row> rows;
    for (auto& v : per_point) rows.insert(rows.end(), v.begin(), v.end());
    return rows;
}

struct VerificationSummary {
    std::size_t match = 0;
    std::size_t discrepant = 0;
    std::size_t not_in_paper = 0;
    std::size_t authoritative_discrepant = 0;
    int exit_status = 0;
};

inline VerificationSummary summarize(const std::vector<Row>& rows) {
    VerificationSummary s;
    for (const auto& r : rows) {
        switch (r.verdict) {
        case Verdict::Match: ++s.match; break;
        case Verdict::NotInPaper: ++s.not_in_paper; break;
        case Verdict::Discrepant:
            ++s.discrepant;
            if (is_authoritative(r.formula_id)) ++s.authoritative_discrepant;
            break;
        }
    }
    s.exit_status = s.authoritative_discrepant > 0 ? 1 : 0;
    return s;
}

/// The default verification suite: five loads, both service laws, the
/// three managed disciplines, first moment of Gamma.
inline SweepSpec default_verify_spec() {
    SweepSpec s;
    s.lambdas = {0.1, 0.5, 1.0, 2.0, 10.0};
    s.disciplines = {Discipline::PreemptiveDrop, Discipline::BlockingSingle, Discipline::ReplaceBuffer};
    s.grid_note = "lambda in {0.1, 0.5, 1, 2, 10}";
    return s;
}

inline bool is_figure_preset(std::string_view name) {
    return name == "fig6" || name == "fig7" || name == "fig8" || name == "fig9";
}

inline SweepSpec figure_preset(std::string_view name) {
    SweepSpec s;
    if (name == "fig6") {
        s.disciplines = {Discipline::FcfsUnbounded};
        s.families = {ServiceFamily::Exponential};
        s.metrics = {AgeProcess::DeltaR, AgeProcess::Gamma};
    } else if (name == "fig7") {
        s.disciplines = {Discipline::BlockingSingle, Discipline::ReplaceBuffer};
        s.families = {ServiceFamily::Exponential};
        s.metrics = {AgeProcess::DeltaR, AgeProcess::Gamma};
    } else if (name == "fig8") {
        s.orders = {1};
    } else if (name == "fig9") {
        s.disciplines = {Discipline::PreemptiveDrop, Discipline::BlockingSingle, Discipline::ReplaceBuffer};
        s.orders = {2};
    } else {
        throw DomainError("unknown figure '" + std::string(name) + "' (expected fig6|fig7|fig8|fig9)");
    }
    return s;
}

inline std::string grid_comment(const SweepSpec& s) {
    return "grid: " + s.grid_note + ", mu=" + detail::fmt(s.mu);
}

/// Minimal log-x line chart: one polyline per formula_id for the analytic
/// curve, simulated points as dots in the same colour.
inline void write_svg(std::ostream& os, const std::vector<Row>& rows, std::string_view title) {
    constexpr double W = 760, H = 480, L = 70, R = 220, T = 40, B = 50;
    struct Series {
        std::vector<std::pair<double, double>> curve, dots;
    };
    std::map<std::string, Series> series;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    const auto take = [&](double x, double y) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    };
    for (const auto& r : rows) {
        if (r.formula_id.empty()) continue;
        auto& s = series[r.formula_id];
        if (r.analytic_value && std::isfinite(*r.analytic_value) && *r.analytic_value > 0) {
            s.curve.emplace_back(r.lambda, *r.analytic_value);
            take(r.lambda, *r.analytic_value);
        }
        if (r.sim_value && std::isfinite(*r.sim_value) && *r.sim_value > 0) {
            s.dots.emplace_back(r.lambda, *r.sim_value);
            take(r.lambda, *r.sim_value);
        }
    }
    if (series.empty() || !(xmax > xmin)) {
        xmin = 0.05, xmax = 50, ymin = 1, ymax = 10;
    }
    const bool log_y = ymax / ymin > 50.0;
    if (!(ymax > ymin)) ymax = ymin + 1;
    const auto fy = [&](double y) { return log_y ? std::log10(y) : y; };
    const double y0 = log_y ? fy(ymin) : std::min(0.0, ymin), y1 = fy(ymax);
    const auto px = [&](double x) { return L + (std::log10(x) - std::log10(xmin)) / (std::log10(xmax) - std::log10(xmin)) * (W - L - R); };
    const auto py = [&](double y) { return H - B - (fy(y) - y0) / (y1 - y0) * (H - T - B); };
    static constexpr const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                               "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};
    char buf[128];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << L << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(std::floor(std::log10(xmin))); e <= static_cast<int>(std::ceil(std::log10(xmax))); ++e) {
        const double x = std::pow(10.0, e);
        if (x < xmin * 0.999 || x > xmax * 1.001) continue;
        std::snprintf(buf, sizeof buf, "%.1f", px(x));
        os << "<text x=\"" << buf << "\" y=\"" << H - B + 18 << "\" font-size=\"11\" text-anchor=\"middle\">" << detail::fmt(x)
           << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double v = y0 + (y1 - y0) * i / 4.0;
        const double y = log_y ? std::pow(10.0, v) : v;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.3g</text>\n",
                      L - 6, py(y) + 4, y);
        os << buf;
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" font-size=\"12\" text-anchor=\"middle\">lambda</text>\n";
    int c = 0;
    for (const auto& [id, s] : series) {
        const char* colour = kColours[c % 10];
        if (s.curve.size() > 1) {
            os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
            for (const auto& [x, y] : s.curve) {
                std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(x), py(y));
                os << buf;
            }
            os << "\"/>\n";
        }
        for (const auto& [x, y] : s.dots) {
            std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"2.5\" fill=\"%s\"/>\n", px(x), py(y), colour);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"12\" height=\"3\" fill=\"%s\"/>", W - R + 12,
                      T + 16.0 * c, colour);
        os << buf << "<text x=\"" << W - R + 30 << "\" y=\"" << T + 16.0 * c + 5 << "\" font-size=\"11\">" << id << "</text>\n";
        ++c;
    }
    os << "</svg>\n";
}

}  // namespace raoi::bench
