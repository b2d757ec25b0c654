#include "ucbqr/event_log.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ucbqr {

namespace {

constexpr std::array<const char*, 5> kKindNames = {"ARRIVAL", "SERVICE_START", "DEPARTURE",
                                                   "SCHEDULE_UPDATE", "EPISODE_END"};

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& field, const char* what) {
    T value{};
    auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw std::runtime_error(std::string("bad ") + what + " field '" + field + "'");
    return value;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find('\t', start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::string to_string(RecordKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<RecordKind> parse_record_kind(const std::string& name) {
    for (std::size_t k = 0; k < kKindNames.size(); ++k)
        if (name == kKindNames[k]) return static_cast<RecordKind>(k);
    return std::nullopt;
}

void write_event_log(std::ostream& out, const EventLog& log) {
    out << "# ucbqr-event-log v1\ttypes=" << log.num_types << "\tservers=" << log.num_servers
        << "\thorizon=" << fmt(log.horizon) << "\taborted=" << (log.aborted ? 1 : 0);
    if (log.aborted) {
        std::string reason = log.abort_reason;
        for (char& c : reason)
            if (c == '\t' || c == '\n' || c == '\r') c = ' ';
        out << "\treason=" << reason;
    }
    out << '\n';
    out << "time\tsequence\tkind\ttype\tserver\tcustomer_id\tpayoff\tdetail\n";
    for (const LogRecord& r : log.records) {
        out << fmt(r.time) << '\t' << r.sequence << '\t' << to_string(r.kind) << '\t' << r.type
            << '\t' << r.server << '\t' << r.customer << '\t' << r.payoff << '\t' << fmt(r.detail)
            << '\n';
    }
}

std::string format_event_log(const EventLog& log) {
    std::ostringstream out;
    write_event_log(out, log);
    return out.str();
}

EventLog read_event_log(std::istream& in) {
    EventLog log;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ucbqr-event-log v1", 0) != 0)
        throw std::runtime_error("missing event-log header");
    for (const std::string& field : split_tabs(line)) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        if (key == "types") log.num_types = parse_number<int>(value, "types");
        else if (key == "servers") log.num_servers = parse_number<int>(value, "servers");
        else if (key == "horizon") log.horizon = parse_number<double>(value, "horizon");
        else if (key == "aborted") log.aborted = value == "1";
        else if (key == "reason") log.abort_reason = value;
    }
    if (!std::getline(in, line)) throw std::runtime_error("missing column header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        if (f.size() != 8) throw std::runtime_error("event-log row needs 8 fields: " + line);
        LogRecord r;
        r.time = parse_number<double>(f[0], "time");
        r.sequence = parse_number<std::int64_t>(f[1], "sequence");
        auto kind = parse_record_kind(f[2]);
        if (!kind) throw std::runtime_error("unknown record kind " + f[2]);
        r.kind = *kind;
        r.type = parse_number<int>(f[3], "type");
        r.server = parse_number<int>(f[4], "server");
        r.customer = parse_number<std::int64_t>(f[5], "customer_id");
        r.payoff = parse_number<int>(f[6], "payoff");
        r.detail = parse_number<double>(f[7], "detail");
        log.records.push_back(r);
    }
    return log;
}

}  // namespace ucbqr
