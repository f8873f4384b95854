#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "raoi/analytic.hpp"
#include "raoi/bench.hpp"
#include "raoi/packet_log.hpp"
#include "raoi/simulator.hpp"

namespace fs = std::filesystem;
using namespace raoi;

namespace {

struct Flags {
    std::vector<std::string> disciplines;
    std::vector<std::string> services;
    std::vector<double> lambdas;
    double mu = 1.0;
    std::vector<std::string> metrics;
    std::vector<int> orders;
    std::uint64_t packets = 1'000'000;
    std::uint64_t seed = 1;
    std::uint64_t warmup = 1'000;
    std::string out = ".";
    bool svg = false;
    double rel_tol = 0.01;
    double z_max = 5.0;
    std::string dump_trace;
    std::string from_trace;
    std::optional<double> delta_r2;
    std::string area = "quadrature";
    double lambda_min = 0.05;
    double lambda_max = 50.0;
    int points = 40;
    unsigned threads = 0;
    std::string figure;
};

// Exit status 1: IO or runtime failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

template <typename T>
const T& single(const std::vector<T>& v, const char* flag) {
    if (v.size() != 1) throw DomainError(std::string("exactly one ") + flag + " is required");
    return v.front();
}

AreaMethod parse_area(const std::string& s) {
    if (s == "printed") return AreaMethod::Printed;
    if (s == "quadrature") return AreaMethod::Quadrature;
    if (s == "joint") return AreaMethod::JointLaw;
    throw DomainError("unknown area method '" + s + "' (expected printed|quadrature|joint)");
}

AnalyticQuery query_from(const Flags& f) {
    AnalyticQuery q;
    q.discipline = parse_discipline(single(f.disciplines, "--discipline"));
    q.service = ServiceModel(f.services.empty() ? ServiceFamily::Exponential : parse_family(single(f.services, "--service")),
                             f.mu);
    q.arrival_rate = single(f.lambdas, "--lambda");
    q.metric = f.metrics.empty() ? AgeProcess::Gamma : parse_process(single(f.metrics, "--metric"));
    q.order = f.orders.empty() ? 1 : single(f.orders, "--k");
    return q;
}

SimConfig sim_config_from(const Flags& f) {
    SimConfig c;
    c.discipline = parse_discipline(single(f.disciplines, "--discipline"));
    c.service = ServiceModel(f.services.empty() ? ServiceFamily::Exponential : parse_family(single(f.services, "--service")),
                             f.mu);
    c.arrival_rate = single(f.lambdas, "--lambda");
    c.n_packets = f.packets;
    c.seed = f.seed;
    c.warmup = f.warmup;
    c.validate();
    return c;
}

int cmd_analytic(const Flags& f) {
    const AnalyticQuery q = query_from(f);
    AnalyticOptions opt;
    opt.area = parse_area(f.area);
    opt.delta_r2 = f.delta_r2;
    const AnalyticResult r = evaluate(q, opt);
    std::cout << "value: " << num(r.value) << '\n';
    std::cout << "formula_id: " << r.formula_id << '\n';
    if (r.external_delta_r2) std::cout << "external E[Delta_R^2]: " << num(*r.external_delta_r2) << '\n';
    return 0;
}

void print_moments(const MomentSet& m) {
    const auto line = [](const char* name, const MomentEstimate& e) {
        std::printf("%-13s %.10g +- %.3g\n", name, e.value, e.std_error);
    };
    line("E[Gamma]", m.gamma1);
    line("E[Gamma^2]", m.gamma2);
    line("E[Delta_R]", m.delta_r1);
    line("E[Delta_R^2]", m.delta_r2);
}

int cmd_simulate(const Flags& f) {
    if (!f.from_trace.empty()) {
        std::ifstream in(f.from_trace);
        if (!in) throw IoError("cannot read " + f.from_trace);
        const EventLogFile file = read_event_log(in);
        if (file.log.size() <= f.warmup) throw DomainError("trace has no more packets than the warm-up");
        double horizon = file.horizon.value_or(0.0);
        if (!file.horizon) {
            for (const auto& p : file.log) horizon = std::max({horizon, p.arrival, p.departure.value_or(0.0)});
        }
        const AgeTrace trace = build_age_trace(file.log, horizon);
        SimConfig c;
        c.n_packets = file.log.size();
        c.warmup = f.warmup;
        c.seed = f.seed;
        const MomentSet m = collect_moments(batch_trace(trace, file.log[f.warmup].arrival, c.n_batches), c);
        std::printf("trace=%s packets=%zu warmup=%llu horizon=%.17g\n", f.from_trace.c_str(), file.log.size(),
                    static_cast<unsigned long long>(f.warmup), horizon);
        print_moments(m);
        return 0;
    }
    const SimConfig c = sim_config_from(f);
    MomentSet m;
    if (!f.dump_trace.empty()) {
        const SimResult r = run(c);
        std::ofstream out(f.dump_trace);
        if (!out) throw IoError("cannot write " + f.dump_trace);
        write_event_log(out, r.log, r.trace.horizon());
        if (!out) throw IoError("write failed for " + f.dump_trace);
        m = r.moments;
    } else {
        m = estimate(c).moments;
    }
    std::printf("discipline=%s service=%s lambda=%.17g mu=%.17g packets=%llu seed=%llu warmup=%llu batches=%d\n",
                std::string(discipline_name(c.discipline)).c_str(), std::string(family_name(c.service.family)).c_str(),
                c.arrival_rate, c.service.rate, static_cast<unsigned long long>(c.n_packets),
                static_cast<unsigned long long>(c.seed), static_cast<unsigned long long>(c.warmup), c.n_batches);
    print_moments(m);
    return 0;
}

void apply_overrides(const Flags& f, bench::SweepSpec& s, bool grid_from_flags) {
    if (!f.lambdas.empty()) {
        s.lambdas = f.lambdas;
        s.grid_note = "lambda list given on the command line, " + std::to_string(f.lambdas.size()) + " points";
    } else if (grid_from_flags) {
        s.lambdas = bench::log_grid(f.lambda_min, f.lambda_max, f.points);
        s.grid_note = "log-spaced lambda in [" + short_num(f.lambda_min) + ", " + short_num(f.lambda_max) + "], " +
                      std::to_string(f.points) + " points";
    }
    s.mu = f.mu;
    if (!f.disciplines.empty()) {
        s.disciplines.clear();
        for (const auto& d : f.disciplines) s.disciplines.push_back(parse_discipline(d));
    }
    if (!f.services.empty()) {
        s.families.clear();
        for (const auto& d : f.services) s.families.push_back(parse_family(d));
    }
    if (!f.metrics.empty()) {
        s.metrics.clear();
        for (const auto& d : f.metrics) s.metrics.push_back(parse_process(d));
    }
    if (!f.orders.empty()) s.orders = f.orders;
    s.n_packets = f.packets;
    s.base_seed = f.seed;
    s.warmup = f.warmup;
}

fs::path prepare_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
    return fs::path(dir);
}

void write_outputs(const fs::path& dir, const std::string& stem, const std::vector<bench::Row>& rows,
                   const bench::SweepSpec& spec, bool svg) {
    const fs::path csv = dir / (stem + ".csv");
    std::ofstream out(csv);
    if (!out) throw IoError("cannot write " + csv.string());
    bench::write_csv(out, rows, bench::grid_comment(spec));
    out.close();
    if (!out) throw IoError("write failed for " + csv.string());
    std::cout << "wrote " << csv.string() << " (" << rows.size() << " rows)\n";
    if (svg) {
        const fs::path path = dir / (stem + ".svg");
        std::ofstream s(path);
        if (!s) throw IoError("cannot write " + path.string());
        bench::write_svg(s, rows, stem);
        std::cout << "wrote " << path.string() << '\n';
    }
}

int cmd_sweep(const Flags& f) {
    bench::SweepSpec spec;
    apply_overrides(f, spec, true);
    spec.validate();
    const fs::path dir = prepare_out(f.out);
    const auto rows = bench::run_sweep(spec, {f.rel_tol, f.z_max}, f.threads, &std::cerr);
    write_outputs(dir, "sweep", rows, spec, f.svg);
    return 0;
}

int cmd_figure(const Flags& f) {
    bench::SweepSpec spec = bench::figure_preset(f.figure);
    apply_overrides(f, spec, f.points != 40 || f.lambda_min != 0.05 || f.lambda_max != 50.0);
    spec.validate();
    const fs::path dir = prepare_out(f.out);
    const auto rows = bench::run_sweep(spec, {f.rel_tol, f.z_max}, f.threads, &std::cerr);
    write_outputs(dir, f.figure, rows, spec, f.svg);
    return 0;
}

int cmd_verify(const Flags& f) {
    bench::SweepSpec spec = bench::default_verify_spec();
    apply_overrides(f, spec, false);
    spec.validate();
    const fs::path dir = prepare_out(f.out);
    const auto rows = bench::run_sweep(spec, {f.rel_tol, f.z_max}, f.threads, &std::cerr);
    for (const auto& r : rows) {
        std::printf("%-12s %-24s %-8s %-4s %-6s k=%d lambda=%-8.4g analytic=%-12.8g sim=%.8g +- %.3g",
                    std::string(bench::verdict_name(r.verdict)).c_str(),
                    r.formula_id.empty() ? "-" : r.formula_id.c_str(), std::string(discipline_name(r.discipline)).c_str(),
                    std::string(family_name(r.service)).c_str(), std::string(process_name(r.metric)).c_str(), r.k,
                    r.lambda, r.analytic_value.value_or(NAN), r.sim_value.value_or(NAN), r.sim_stderr.value_or(NAN));
        if (r.z_score) std::printf(" z=%.3g", *r.z_score);
        if (r.verdict == bench::Verdict::Discrepant && !bench::is_authoritative(r.formula_id)) std::printf(" (non-fatal)");
        std::printf("\n");
    }
    const auto s = bench::summarize(rows);
    std::printf("summary: %zu match, %zu discrepant (%zu authoritative), %zu not-in-paper; exit %d\n", s.match,
                s.discrepant, s.authoritative_discrepant, s.not_in_paper, s.exit_status);
    write_outputs(dir, "verify", rows, spec, f.svg);
    return s.exit_status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relative age of information: analytic moments, simulation and verification"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value file; command-line flags take precedence");
    Flags f;
    std::optional<double> delta_r2;
    app.add_option("--discipline", f.disciplines, "fcfs|prmp|blocking|replace")->delimiter(',');
    app.add_option("--service", f.services, "exp|det")->delimiter(',');
    app.add_option("--lambda", f.lambdas, "arrival rate (comma list for sweeps)")->delimiter(',');
    app.add_option("--mu", f.mu, "service rate");
    app.add_option("--metric", f.metrics, "gamma|deltaR")->delimiter(',');
    app.add_option("--k", f.orders, "moment order 1|2")->delimiter(',');
    app.add_option("--packets", f.packets, "packets per simulation");
    app.add_option("--seed", f.seed, "seed (sweeps: base seed, point i uses seed+i)");
    app.add_option("--warmup", f.warmup, "arrivals dropped before estimation");
    app.add_option("--out", f.out, "output directory");
    app.add_flag("--svg", f.svg, "also render an SVG chart");
    app.add_option("--rel-tol", f.rel_tol, "relative tolerance for verdicts");
    app.add_option("--z-max", f.z_max, "standard-error multiple for verdicts");
    app.add_option("--dump-trace", f.dump_trace, "write the packet event log");
    app.add_option("--from-trace", f.from_trace, "estimate moments from an event log");
    app.add_option("--deltaR2", delta_r2, "external E[Delta_R^2] for second-moment formulas");
    app.add_option("--area", f.area, "printed|quadrature|joint");
    app.add_option("--lambda-min", f.lambda_min, "sweep grid lower end");
    app.add_option("--lambda-max", f.lambda_max, "sweep grid upper end");
    app.add_option("--points", f.points, "sweep grid size");
    app.add_option("--threads", f.threads, "worker threads for sweeps (0: all cores)");

    auto* analytic = app.add_subcommand("analytic", "evaluate one closed-form moment");
    auto* simulate = app.add_subcommand("simulate", "simulate one configuration");
    auto* sweep = app.add_subcommand("sweep", "lambda sweep to CSV");
    auto* verify = app.add_subcommand("verify", "analytic versus simulation verdicts");
    auto* figure = app.add_subcommand("figure", "figure presets fig6|fig7|fig8|fig9");
    figure->add_option("name", f.figure, "fig6|fig7|fig8|fig9")->required();
    for (auto* sub : {analytic, simulate, sweep, verify, figure}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    f.delta_r2 = delta_r2;

    try {
        if (analytic->parsed()) return cmd_analytic(f);
        if (simulate->parsed()) return cmd_simulate(f);
        if (sweep->parsed()) return cmd_sweep(f);
        if (verify->parsed()) return cmd_verify(f);
        if (figure->parsed()) return cmd_figure(f);
    } catch (const NotInCatalogError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
