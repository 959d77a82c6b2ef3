#include "cangat/can.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cangat/error.hpp"

namespace cangat {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_timestamp(std::string_view tok) {
    std::string buf(trim(tok));
    if (buf.empty()) raise(Errc::MalformedLine, "empty timestamp field");
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(buf.c_str(), &end);
    if (errno != 0 || end != buf.c_str() + buf.size() || v < 0.0 || !std::isfinite(v))
        raise(Errc::MalformedLine, "bad timestamp '" + buf + "'");
    return v;
}

std::uint32_t parse_hex_field(std::string_view tok, Errc on_bad, const char* what) {
    tok = trim(tok);
    if (tok.empty() || tok.size() > 8) raise(on_bad, std::string("bad ") + what);
    std::uint32_t v = 0;
    for (char c : tok) {
        int h = hex_value(c);
        if (h < 0) raise(on_bad, std::string("non-hex ") + what + " '" + std::string(tok) + "'");
        v = (v << 4) | static_cast<std::uint32_t>(h);
    }
    return v;
}

std::uint8_t parse_payload_byte(std::string_view tok) {
    tok = trim(tok);
    if (tok.size() != 2 || hex_value(tok[0]) < 0 || hex_value(tok[1]) < 0)
        raise(Errc::BadByte, "bad payload byte '" + std::string(tok) + "'");
    return static_cast<std::uint8_t>((hex_value(tok[0]) << 4) | hex_value(tok[1]));
}

Label parse_flag(std::string_view tok) {
    tok = trim(tok);
    if (tok == "R") return Label::Benign;
    if (tok == "T") return Label::Attack;
    if (tok == "U") return Label::Unknown;
    raise(Errc::MalformedLine, "bad label flag '" + std::string(tok) + "'");
}

std::uint16_t check_id(std::uint32_t id) {
    if (id > kMaxCanId)
        raise(Errc::IdOutOfRange, "CAN id 0x" + [&] {
            char b[16];
            std::snprintf(b, sizeof(b), "%X", id);
            return std::string(b);
        }() + " exceeds the 11-bit range");
    return static_cast<std::uint16_t>(id);
}

// Shared body for canonical and benchmark CSV lines. Canonical requires the
// trailing flag; benchmark treats it as optional.
CanMessage parse_csv_line(std::string_view line, bool flag_required) {
    auto fields = split(line, ',');
    if (fields.size() < 3) raise(Errc::MalformedLine, "expected at least 3 comma-separated fields");

    CanMessage m;
    m.timestamp = parse_timestamp(fields[0]);
    m.can_id = check_id(parse_hex_field(fields[1], Errc::MalformedLine, "id"));

    std::string dlc_tok(trim(fields[2]));
    if (dlc_tok.size() != 1 || dlc_tok[0] < '0' || dlc_tok[0] > '8')
        raise(Errc::MalformedLine, "bad DLC '" + dlc_tok + "'");
    m.dlc = static_cast<std::uint8_t>(dlc_tok[0] - '0');

    const std::size_t with_flag = 3 + m.dlc + 1;
    const std::size_t without_flag = 3 + m.dlc;
    bool has_flag;
    if (fields.size() == with_flag) {
        has_flag = true;
    } else if (!flag_required && fields.size() == without_flag) {
        has_flag = false;
    } else {
        raise(Errc::DlcMismatch, "DLC " + std::to_string(int(m.dlc)) + " but line has " +
                                     std::to_string(fields.size() - 3) + " trailing fields");
    }

    for (int i = 0; i < m.dlc; ++i) m.payload[i] = parse_payload_byte(fields[3 + i]);
    m.label = has_flag ? parse_flag(fields[3 + m.dlc]) : Label::Unknown;
    return m;
}

} // namespace

CanMessage parse_canonical_line(std::string_view line) { return parse_csv_line(line, true); }

CanMessage parse_benchmark_line(std::string_view line) { return parse_csv_line(line, false); }

std::string format_canonical_line(const CanMessage& m) {
    char ts[64];
    // Canonical timestamps carry at least 6 fractional digits; widen until the
    // printed value parses back exactly so format->parse round-trips.
    for (int prec = 6;; prec += 3) {
        std::snprintf(ts, sizeof(ts), "%.*f", prec, m.timestamp);
        if (std::strtod(ts, nullptr) == m.timestamp || prec >= 18) break;
    }
    std::string out = ts;
    char buf[16];
    std::snprintf(buf, sizeof(buf), ",%04X,%d", m.can_id, int(m.dlc));
    out += buf;
    for (int i = 0; i < m.dlc; ++i) {
        std::snprintf(buf, sizeof(buf), ",%02X", m.payload[i]);
        out += buf;
    }
    switch (m.label) {
        case Label::Benign: out += ",R"; break;
        case Label::Attack: out += ",T"; break;
        case Label::Unknown: out += ",U"; break;
    }
    return out;
}

CanMessage parse_candump_line(std::string_view line) {
    std::string_view s = trim(line);
    if (s.empty() || s.front() != '(') raise(Errc::MalformedLine, "expected '(ts) iface id#data'");
    std::size_t close = s.find(')');
    if (close == std::string_view::npos) raise(Errc::MalformedLine, "unterminated timestamp");

    CanMessage m;
    m.timestamp = parse_timestamp(s.substr(1, close - 1));

    std::string_view rest = trim(s.substr(close + 1));
    std::size_t sp = rest.find_first_of(" \t");
    if (sp == std::string_view::npos) raise(Errc::MalformedLine, "missing interface field");
    std::string_view frame = trim(rest.substr(sp + 1));

    std::size_t hash = frame.find('#');
    if (hash == std::string_view::npos || hash == 0)
        raise(Errc::MalformedLine, "missing id#data separator");
    m.can_id = check_id(parse_hex_field(frame.substr(0, hash), Errc::MalformedLine, "id"));

    std::string_view hex = frame.substr(hash + 1);
    if (hex.size() % 2 != 0)
        raise(Errc::OddHexLength, "payload has odd hex length " + std::to_string(hex.size()));
    if (hex.size() > 16)
        raise(Errc::MalformedLine, "payload longer than 8 bytes");
    m.dlc = static_cast<std::uint8_t>(hex.size() / 2);
    for (int i = 0; i < m.dlc; ++i) m.payload[i] = parse_payload_byte(hex.substr(2 * i, 2));
    m.label = Label::Unknown;
    return m;
}

TraceData read_trace_stream(std::istream& in, TraceFormat format, bool has_labels,
                            bool strict_timestamps) {
    TraceData out;
    std::string line;
    std::size_t line_no = 0;
    bool sorted = true;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        try {
            CanMessage m;
            switch (format) {
                case TraceFormat::CanonicalCsv: m = parse_canonical_line(sv); break;
                case TraceFormat::BenchmarkCsv: m = parse_benchmark_line(sv); break;
                case TraceFormat::CandumpText: m = parse_candump_line(sv); break;
                default: raise(Errc::UnsupportedFormat, "unknown trace format");
            }
            if (!has_labels) m.label = Label::Unknown;
            if (!out.messages.empty() && m.timestamp < out.messages.back().timestamp) {
                if (strict_timestamps)
                    raise(Errc::NonMonotonicTimestamp,
                          "timestamp goes backwards at line " + std::to_string(line_no));
                sorted = false;
            }
            out.messages.push_back(m);
            ++out.summary.parsed;
        } catch (const Error& e) {
            if (e.code() == Errc::NonMonotonicTimestamp || e.code() == Errc::UnsupportedFormat)
                throw;
            ++out.summary.skipped;
            if (out.summary.diagnostics.size() < IngestSummary::kMaxDiagnostics)
                out.summary.diagnostics.push_back({line_no, e.what()});
        }
    }
    if (!sorted) {
        std::stable_sort(out.messages.begin(), out.messages.end(),
                         [](const CanMessage& a, const CanMessage& b) {
                             return a.timestamp < b.timestamp;
                         });
    }
    return out;
}

TraceData read_trace(const TraceSource& source, bool strict_timestamps) {
    std::ifstream in(source.path);
    if (!in) raise(Errc::IoError, "cannot open trace file '" + source.path + "'");
    return read_trace_stream(in, source.format, source.has_labels, strict_timestamps);
}

void write_canonical_csv(std::ostream& out, const std::vector<CanMessage>& messages) {
    for (const auto& m : messages) out << format_canonical_line(m) << '\n';
}

void write_canonical_csv(const std::string& path, const std::vector<CanMessage>& messages) {
    std::ofstream out(path);
    if (!out) raise(Errc::IoError, "cannot open '" + path + "' for writing");
    write_canonical_csv(out, messages);
    if (!out) raise(Errc::IoError, "error while writing '" + path + "'");
}

} // namespace cangat
