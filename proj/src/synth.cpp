#include "cangat/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cangat/error.hpp"
#include "cangat/rng.hpp"

namespace cangat {

namespace {

std::size_t count_at_rate(double duration, double rate) {
    // floor(duration * rate) with a nudge so exact products are not lost to
    // binary rounding (0.3 * 1000 must give 300, not 299).
    return static_cast<std::size_t>(std::floor(duration * rate + 1e-9));
}

void fill_payload(const EcuProfile& p, std::size_t emission_index, Rng& rng,
                  std::array<std::uint8_t, 8>& walk_state, CanMessage& m) {
    switch (p.payload_model) {
        case PayloadModel::Constant:
            m.payload = p.constant_bytes;
            break;
        case PayloadModel::CounterByte:
            m.payload = p.constant_bytes;
            if (p.counter_index >= 0 && p.counter_index < p.dlc)
                m.payload[p.counter_index] = static_cast<std::uint8_t>(emission_index & 0xFF);
            break;
        case PayloadModel::RandomWalk: {
            const int span = 2 * p.walk_step + 1;
            for (int i = 0; i < p.dlc; ++i) {
                int delta = static_cast<int>(rng.uniform_int(span)) - p.walk_step;
                int v = int(walk_state[i]) + delta;
                walk_state[i] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
            }
            m.payload = walk_state;
            break;
        }
    }
}

void sort_by_time(std::vector<CanMessage>& msgs) {
    std::stable_sort(msgs.begin(), msgs.end(), [](const CanMessage& a, const CanMessage& b) {
        return a.timestamp < b.timestamp;
    });
}

} // namespace

std::vector<CanMessage> generate_benign(const std::vector<EcuProfile>& profiles, double horizon,
                                        std::uint64_t seed) {
    if (profiles.empty()) raise(Errc::EmptyProfileSet, "no ECU profiles given");
    if (horizon <= 0.0) raise(Errc::WindowOutOfRange, "horizon must be positive");

    std::vector<CanMessage> out;
    for (std::size_t pi = 0; pi < profiles.size(); ++pi) {
        const EcuProfile& p = profiles[pi];
        if (p.period <= 0.0) raise(Errc::EmptyProfileSet, "profile period must be positive");
        if (p.can_id > kMaxCanId) raise(Errc::IdOutOfRange, "profile id exceeds 11 bits");
        if (p.jitter < 0.0 || p.jitter >= 1.0)
            raise(Errc::EmptyProfileSet, "jitter must be in [0, 1)");

        // One independent stream per profile, keyed by id and position.
        Rng rng(Rng::derive(seed, (std::uint64_t(p.can_id) << 20) | pi));
        std::array<std::uint8_t, 8> walk_state{};
        walk_state.fill(0x80);

        const std::size_t n = count_at_rate(horizon, 1.0 / p.period);
        for (std::size_t k = 0; k < n; ++k) {
            CanMessage m;
            double t = double(k) * p.period;
            if (p.jitter > 0.0) t += p.jitter * p.period * (rng.uniform01() - 0.5);
            m.timestamp = std::max(0.0, t);
            m.can_id = p.can_id;
            m.dlc = p.dlc;
            m.label = Label::Benign;
            fill_payload(p, k, rng, walk_state, m);
            out.push_back(m);
        }
    }
    sort_by_time(out);
    return out;
}

std::vector<CanMessage> inject_attack(const std::vector<CanMessage>& trace,
                                      const AttackScenario& sc, std::uint64_t seed) {
    if (sc.duration <= 0.0 || sc.start < 0.0)
        raise(Errc::WindowOutOfRange, "attack window must have start >= 0 and duration > 0");
    if (trace.empty()) raise(Errc::EmptyTrace, "cannot inject into an empty trace");

    const double t_lo = trace.front().timestamp;
    const double t_hi = trace.back().timestamp;
    if (sc.start > t_hi || sc.start + sc.duration < t_lo)
        raise(Errc::WindowOutOfRange, "attack window does not overlap the trace");

    std::vector<CanMessage> injected;
    Rng rng(Rng::derive(seed, 0x41544B | (std::uint64_t(sc.kind) << 32)));

    switch (sc.kind) {
        case AttackKind::Flooding: {
            const std::size_t n = count_at_rate(sc.duration, sc.rate);
            for (std::size_t k = 0; k < n; ++k) {
                CanMessage m;
                m.timestamp = sc.start + double(k) / sc.rate;
                m.can_id = sc.flood_id;
                m.dlc = 8;
                m.payload.fill(0x00);
                m.label = Label::Attack;
                injected.push_back(m);
            }
            break;
        }
        case AttackKind::Fuzzing: {
            const std::size_t n = count_at_rate(sc.duration, sc.rate);
            for (std::size_t k = 0; k < n; ++k) {
                CanMessage m;
                m.timestamp = sc.start + double(k) / sc.rate;
                m.can_id = static_cast<std::uint16_t>(rng.uniform_int(kMaxCanId + 1));
                m.dlc = 8;
                for (auto& b : m.payload) b = static_cast<std::uint8_t>(rng.uniform_int(256));
                m.label = Label::Attack;
                injected.push_back(m);
            }
            break;
        }
        case AttackKind::Spoofing: {
            const std::size_t n = count_at_rate(sc.duration, sc.rate);
            for (std::size_t k = 0; k < n; ++k) {
                CanMessage m;
                m.timestamp = sc.start + double(k) / sc.rate;
                m.can_id = sc.target_id;
                m.dlc = sc.forged_dlc;
                m.payload = sc.forged_payload;
                m.label = Label::Attack;
                injected.push_back(m);
            }
            break;
        }
        case AttackKind::Replay: {
            const double src_lo = sc.source_start;
            const double src_hi = sc.source_start + sc.source_duration;
            for (const auto& m : trace) {
                if (m.timestamp >= src_lo && m.timestamp < src_hi) {
                    CanMessage copy = m;
                    copy.timestamp = sc.start + (m.timestamp - src_lo);
                    copy.label = Label::Attack;
                    injected.push_back(copy);
                }
            }
            if (injected.empty())
                raise(Errc::ReplaySourceEmpty, "replay source window contains no messages");
            break;
        }
    }

    std::vector<CanMessage> merged = trace;
    merged.insert(merged.end(), injected.begin(), injected.end());
    sort_by_time(merged);
    return merged;
}

std::vector<CanMessage> generate_scenario(const SynthScenario& scenario) {
    std::vector<CanMessage> trace = generate_benign(scenario.profiles, scenario.horizon,
                                                    scenario.seed);
    for (std::size_t i = 0; i < scenario.attacks.size(); ++i)
        trace = inject_attack(trace, scenario.attacks[i], Rng::derive(scenario.seed, 9000 + i));
    return trace;
}

// ---------------------------------------------------------------------------
// Scenario file parsing
// ---------------------------------------------------------------------------

namespace {

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X'))
            return std::stoull(v.substr(2), nullptr, 16);
        return std::stoull(v);
    } catch (...) {
        raise(Errc::ConfigError, "bad integer for '" + key + "': " + v);
    }
}

double parse_f64(const std::string& v, const std::string& key) {
    try {
        return std::stod(v);
    } catch (...) {
        raise(Errc::ConfigError, "bad number for '" + key + "': " + v);
    }
}

std::array<std::uint8_t, 8> parse_bytes(const std::string& v, const std::string& key) {
    std::array<std::uint8_t, 8> out{};
    std::istringstream iss(v);
    std::string tok;
    std::size_t i = 0;
    while (iss >> tok) {
        if (i >= 8) raise(Errc::ConfigError, "'" + key + "' lists more than 8 bytes");
        out[i++] = static_cast<std::uint8_t>(parse_u64("0x" + tok, key));
    }
    return out;
}

struct Section {
    std::string name; // "", "ecu" or "attack"
    std::vector<std::pair<std::string, std::string>> kv;

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : kv)
            if (k == key) return &v;
        return nullptr;
    }
    void reject_unknown(std::initializer_list<const char*> allowed) const {
        for (const auto& [k, v] : kv) {
            (void)v;
            bool ok = false;
            for (const char* a : allowed)
                if (k == a) ok = true;
            if (!ok)
                raise(Errc::ConfigError, "unknown key '" + k + "' in " +
                                             (name.empty() ? "top-level scope" : "[" + name + "]"));
        }
    }
    std::string need(const std::string& key) const {
        const std::string* v = find(key);
        if (!v) raise(Errc::ConfigError, "[" + name + "] section missing key '" + key + "'");
        return *v;
    }
};

EcuProfile make_profile(const Section& s) {
    s.reject_unknown({"id", "period", "jitter", "dlc", "payload", "bytes", "counter_index",
                      "step"});
    EcuProfile p;
    p.can_id = static_cast<std::uint16_t>(parse_u64(s.need("id"), "id"));
    p.period = parse_f64(s.need("period"), "period");
    if (const auto* v = s.find("jitter")) p.jitter = parse_f64(*v, "jitter");
    if (const auto* v = s.find("dlc")) p.dlc = static_cast<std::uint8_t>(parse_u64(*v, "dlc"));
    if (p.dlc > kMaxDlc) raise(Errc::ConfigError, "dlc must be 0..8");
    if (const auto* v = s.find("payload")) {
        if (*v == "constant") p.payload_model = PayloadModel::Constant;
        else if (*v == "counter") p.payload_model = PayloadModel::CounterByte;
        else if (*v == "random_walk") p.payload_model = PayloadModel::RandomWalk;
        else raise(Errc::ConfigError, "unknown payload model '" + *v + "'");
    }
    if (const auto* v = s.find("bytes")) p.constant_bytes = parse_bytes(*v, "bytes");
    if (const auto* v = s.find("counter_index"))
        p.counter_index = static_cast<int>(parse_u64(*v, "counter_index"));
    if (const auto* v = s.find("step")) p.walk_step = static_cast<int>(parse_u64(*v, "step"));
    return p;
}

AttackScenario make_attack(const Section& s) {
    s.reject_unknown({"kind", "start", "duration", "rate", "flood_id", "target_id", "payload",
                      "dlc", "source_start", "source_duration"});
    AttackScenario a;
    const std::string kind = s.need("kind");
    if (kind == "flooding") a.kind = AttackKind::Flooding;
    else if (kind == "fuzzing") a.kind = AttackKind::Fuzzing;
    else if (kind == "spoofing") a.kind = AttackKind::Spoofing;
    else if (kind == "replay") a.kind = AttackKind::Replay;
    else raise(Errc::ConfigError, "unknown attack kind '" + kind + "'");

    a.start = parse_f64(s.need("start"), "start");
    a.duration = parse_f64(s.need("duration"), "duration");
    if (const auto* v = s.find("rate")) a.rate = parse_f64(*v, "rate");
    if (const auto* v = s.find("flood_id"))
        a.flood_id = static_cast<std::uint16_t>(parse_u64(*v, "flood_id"));
    if (const auto* v = s.find("target_id"))
        a.target_id = static_cast<std::uint16_t>(parse_u64(*v, "target_id"));
    if (const auto* v = s.find("payload")) a.forged_payload = parse_bytes(*v, "payload");
    if (const auto* v = s.find("dlc"))
        a.forged_dlc = static_cast<std::uint8_t>(parse_u64(*v, "dlc"));
    if (const auto* v = s.find("source_start")) a.source_start = parse_f64(*v, "source_start");
    if (const auto* v = s.find("source_duration"))
        a.source_duration = parse_f64(*v, "source_duration");
    if (a.kind != AttackKind::Replay && a.rate <= 0.0)
        raise(Errc::ConfigError, "attack rate must be positive");
    return a;
}

} // namespace

SynthScenario parse_scenario_text(const std::string& text, const std::string& origin) {
    std::vector<Section> sections(1);
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = strip(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                raise(Errc::ConfigError, origin + ":" + std::to_string(line_no) +
                                             ": unterminated section header");
            std::string name = strip(line.substr(1, line.size() - 2));
            if (name != "ecu" && name != "attack")
                raise(Errc::ConfigError, origin + ": unknown section [" + name + "]");
            sections.push_back({name, {}});
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            raise(Errc::ConfigError,
                  origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        sections.back().kv.emplace_back(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }

    SynthScenario sc;
    for (const auto& s : sections) {
        if (s.name.empty()) {
            s.reject_unknown({"horizon", "seed"});
            if (const auto* v = s.find("horizon")) sc.horizon = parse_f64(*v, "horizon");
            if (const auto* v = s.find("seed")) sc.seed = parse_u64(*v, "seed");
        } else if (s.name == "ecu") {
            sc.profiles.push_back(make_profile(s));
        } else {
            sc.attacks.push_back(make_attack(s));
        }
    }
    if (sc.profiles.empty())
        raise(Errc::EmptyProfileSet, origin + ": scenario defines no [ecu] sections");
    return sc;
}

SynthScenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::IoError, "cannot open scenario file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str(), path);
}

} // namespace cangat
