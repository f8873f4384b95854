#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "raoi/error.hpp"

namespace raoi {

enum class Outcome { Delivered, DroppedOnArrival, Preempted, ReplacedInBuffer, InFlight };

inline std::string_view outcome_name(Outcome o) {
    switch (o) {
    case Outcome::Delivered: return "delivered";
    case Outcome::DroppedOnArrival: return "dropped";
    case Outcome::Preempted: return "preempted";
    case Outcome::ReplacedInBuffer: return "replaced";
    case Outcome::InFlight: return "inflight";
    }
    return "?";
}

inline Outcome parse_outcome(std::string_view s) {
    if (s == "delivered") return Outcome::Delivered;
    if (s == "dropped") return Outcome::DroppedOnArrival;
    if (s == "preempted") return Outcome::Preempted;
    if (s == "replaced") return Outcome::ReplacedInBuffer;
    if (s == "inflight") return Outcome::InFlight;
    throw StructuralError("unknown outcome '" + std::string(s) + "'");
}

/// Lifecycle of one update packet. A packet that never reached the server has
/// no service_start; only delivered packets carry a departure.
struct PacketRecord {
    std::uint64_t id = 0;
    double arrival = 0.0;
    std::optional<double> service_start;
    std::optional<double> departure;
    Outcome outcome = Outcome::InFlight;

    friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

using PacketLog = std::vector<PacketRecord>;

/// Throws StructuralError on the first record that breaks the log invariants.
inline void validate_log(const PacketLog& log) {
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& p = log[i];
        const auto where = [&] { return " (packet " + std::to_string(p.id) + ")"; };
        if (i > 0 && !(p.arrival > log[i - 1].arrival)) {
            throw StructuralError("arrival times must be strictly increasing" + where());
        }
        if (p.service_start && *p.service_start < p.arrival) {
            throw StructuralError("service starts before arrival" + where());
        }
        if (p.departure) {
            if (*p.departure < p.arrival) throw StructuralError("delivery before arrival" + where());
            if (p.service_start && *p.departure < *p.service_start) {
                throw StructuralError("delivery before service start" + where());
            }
        }
        if ((p.outcome == Outcome::Delivered) != p.departure.has_value()) {
            throw StructuralError("departure present iff outcome is delivered" + where());
        }
    }
}

namespace detail {

inline std::string format_time(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", t);
    return buf;
}

inline std::optional<double> parse_time_field(std::string_view field, std::size_t line_no) {
    if (field.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw StructuralError("bad time field '" + std::string(field) + "' on line " +
                              std::to_string(line_no));
    }
    return value;
}

}  // namespace detail

/// Event-log interchange: `id,t_arrival,t_service_start,t_departure,outcome`,
/// one record per line, absent values left empty. A leading `# horizon=T`
/// comment carries the observation horizon.
inline void write_event_log(std::ostream& os, const PacketLog& log,
                            std::optional<double> horizon = std::nullopt) {
    if (horizon) os << "# horizon=" << detail::format_time(*horizon) << '\n';
    for (const auto& p : log) {
        os << p.id << ',' << detail::format_time(p.arrival) << ',';
        if (p.service_start) os << detail::format_time(*p.service_start);
        os << ',';
        if (p.departure) os << detail::format_time(*p.departure);
        os << ',' << outcome_name(p.outcome) << '\n';
    }
}

struct EventLogFile {
    PacketLog log;
    std::optional<double> horizon;
};

inline EventLogFile read_event_log(std::istream& is) {
    EventLogFile out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            constexpr std::string_view key = "# horizon=";
            if (std::string_view(line).starts_with(key)) {
                out.horizon = detail::parse_time_field(std::string_view(line).substr(key.size()), line_no);
            }
            continue;
        }
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != 5) {
            throw StructuralError("expected 5 fields on line " + std::to_string(line_no));
        }
        PacketRecord p;
        const auto id_field = fields[0];
        const auto [ptr, ec] = std::from_chars(id_field.data(), id_field.data() + id_field.size(), p.id);
        if (ec != std::errc{} || ptr != id_field.data() + id_field.size()) {
            throw StructuralError("bad id on line " + std::to_string(line_no));
        }
        const auto arrival = detail::parse_time_field(fields[1], line_no);
        if (!arrival) throw StructuralError("missing arrival on line " + std::to_string(line_no));
        p.arrival = *arrival;
        if (!out.log.empty() && p.arrival < out.log.back().arrival) {
            throw StructuralError("arrivals out of order on line " + std::to_string(line_no));
        }
        p.service_start = detail::parse_time_field(fields[2], line_no);
        p.departure = detail::parse_time_field(fields[3], line_no);
        p.outcome = parse_outcome(fields[4]);
        out.log.push_back(p);
    }
    return out;
}

}  // namespace raoi
