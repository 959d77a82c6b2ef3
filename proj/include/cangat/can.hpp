#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cangat {

enum class Label : std::uint8_t { Benign = 0, Attack = 1, Unknown = 2 };

constexpr std::uint16_t kMaxCanId = 0x7FF; // 11-bit arbitration identifier
constexpr int kMaxDlc = 8;

/// One parsed CAN frame. `payload` holds exactly `dlc` bytes.
struct CanMessage {
    double timestamp = 0.0;
    std::uint16_t can_id = 0;
    std::uint8_t dlc = 0;
    std::array<std::uint8_t, 8> payload{};
    Label label = Label::Unknown;

    bool operator==(const CanMessage& o) const {
        if (timestamp != o.timestamp || can_id != o.can_id || dlc != o.dlc || label != o.label)
            return false;
        for (int i = 0; i < dlc; ++i)
            if (payload[i] != o.payload[i]) return false;
        return true;
    }
};

enum class TraceFormat { BenchmarkCsv, CandumpText, CanonicalCsv };

struct TraceSource {
    TraceFormat format = TraceFormat::CanonicalCsv;
    std::string path;
    bool has_labels = true; // false forces every label to Unknown
};

/// Canonical line: `timestamp,IDhex4,DLC,byte0,...,byte{DLC-1},flag`
/// with flag in {R,T,U}. Throws Error on malformed input.
CanMessage parse_canonical_line(std::string_view line);
std::string format_canonical_line(const CanMessage& m);

/// Candump line: `(ts) iface ID#HEXPAYLOAD`. Labels come back Unknown.
CanMessage parse_candump_line(std::string_view line);

/// Benchmark CSV line: like canonical but with a free-width hex ID and an
/// optional R/T flag column (absent flag -> Unknown).
CanMessage parse_benchmark_line(std::string_view line);

struct LineDiagnostic {
    std::size_t line_no = 0;
    std::string message;
};

struct IngestSummary {
    std::size_t parsed = 0;
    std::size_t skipped = 0;
    std::vector<LineDiagnostic> diagnostics; // capped at kMaxDiagnostics
    static constexpr std::size_t kMaxDiagnostics = 100;
};

struct TraceData {
    std::vector<CanMessage> messages;
    IngestSummary summary;
};

/// Reads a whole trace. Malformed lines are skipped with a diagnostic.
/// Lenient mode (default) stable-sorts by timestamp; strict mode raises
/// NonMonotonicTimestamp on the first out-of-order message instead.
TraceData read_trace(const TraceSource& source, bool strict_timestamps = false);

/// Stream variant used by read_trace; parses an already-open stream.
TraceData read_trace_stream(std::istream& in, TraceFormat format, bool has_labels,
                            bool strict_timestamps);

void write_canonical_csv(const std::string& path, const std::vector<CanMessage>& messages);
void write_canonical_csv(std::ostream& out, const std::vector<CanMessage>& messages);

} // namespace cangat
