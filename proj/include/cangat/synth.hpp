#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cangat/can.hpp"

namespace cangat {

enum class PayloadModel { Constant, CounterByte, RandomWalk };

/// One periodic transmitter on the simulated bus.
struct EcuProfile {
    std::uint16_t can_id = 0;
    double period = 0.01;   // seconds between emissions, > 0
    double jitter = 0.0;    // fraction of period, in [0, 1)
    std::uint8_t dlc = 8;
    PayloadModel payload_model = PayloadModel::Constant;
    std::array<std::uint8_t, 8> constant_bytes{}; // Constant
    int counter_index = 0;                        // CounterByte
    int walk_step = 1;                            // RandomWalk, per-byte step bound
};

enum class AttackKind { Flooding, Fuzzing, Spoofing, Replay };

struct AttackScenario {
    AttackKind kind = AttackKind::Flooding;
    double start = 0.0;     // seconds
    double duration = 1.0;  // seconds, > 0
    double rate = 100.0;    // injected messages per second (not used by Replay)
    // Flooding
    std::uint16_t flood_id = 0x000;
    // Spoofing
    std::uint16_t target_id = 0;
    std::array<std::uint8_t, 8> forged_payload{};
    std::uint8_t forged_dlc = 8;
    // Replay: copies trace content from [source_start, source_start+source_duration)
    // to the attack window starting at `start`.
    double source_start = 0.0;
    double source_duration = 0.0;
};

/// Full scenario: benign bus plus a list of attacks applied in order.
struct SynthScenario {
    double horizon = 60.0;
    std::uint64_t seed = 1;
    std::vector<EcuProfile> profiles;
    std::vector<AttackScenario> attacks;
};

/// Benign traffic for all profiles over [0, horizon), time-sorted, labeled
/// Benign. Deterministic for a fixed seed.
std::vector<CanMessage> generate_benign(const std::vector<EcuProfile>& profiles, double horizon,
                                        std::uint64_t seed);

/// Merges attack messages into a sorted trace. Original messages are kept
/// untouched; injected ones carry Label::Attack.
std::vector<CanMessage> inject_attack(const std::vector<CanMessage>& trace,
                                      const AttackScenario& scenario, std::uint64_t seed);

/// generate_benign + every attack in scenario order.
std::vector<CanMessage> generate_scenario(const SynthScenario& scenario);

/// Parses the key/value scenario format (top-level keys plus repeated [ecu]
/// and [attack] sections). See scenarios/desk.cfg for the shape.
SynthScenario parse_scenario_file(const std::string& path);
SynthScenario parse_scenario_text(const std::string& text, const std::string& origin);

} // namespace cangat
