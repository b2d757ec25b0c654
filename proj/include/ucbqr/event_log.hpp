#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ucbqr {

enum class RecordKind { kArrival, kServiceStart, kDeparture, kScheduleUpdate, kEpisodeEnd };

std::string to_string(RecordKind kind);
std::optional<RecordKind> parse_record_kind(const std::string& name);

/// One line of the simulator's output. Unused fields are -1.
///
/// detail carries: the planned service duration for SERVICE_START, the
/// per-agent work of the finished service for DEPARTURE, the new agent count
/// for SCHEDULE_UPDATE and the episode index for EPISODE_END.
struct LogRecord {
    double time = 0.0;
    std::int64_t sequence = 0;
    RecordKind kind = RecordKind::kArrival;
    int type = -1;
    int server = -1;
    std::int64_t customer = -1;
    int payoff = -1;
    double detail = 0.0;

    bool operator==(const LogRecord&) const = default;
};

struct EventLog {
    int num_types = 0;
    int num_servers = 0;
    double horizon = 0.0;
    std::vector<LogRecord> records;
    // Set when the replication stopped early (policy failure).
    bool aborted = false;
    std::string abort_reason;

    bool operator==(const EventLog&) const = default;
};

/// Tab-separated, one record per line, preceded by a header line. Doubles
/// are written in shortest round-trip form so a re-read log compares equal.
void write_event_log(std::ostream& out, const EventLog& log);
EventLog read_event_log(std::istream& in);
std::string format_event_log(const EventLog& log);

}  // namespace ucbqr
