#ifndef SKYVEIL_BENCH_HPP
#define SKYVEIL_BENCH_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skyveil/smpc.hpp"

namespace skyveil {

// One benchmark configuration's result. Timings are medians/95th percentiles
// over `reps` repetitions with fresh random inputs; bytes are counted at the
// framing layer (headers included) and must not depend on the inputs.
struct BenchRecord {
    std::string task;  // "tracking" or "proof"
    std::string mode;  // "semi" or "malicious"
    int k = 0;
    int f = 0;
    int reps = 0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    uint64_t bytes_p1 = 0;  // satellite / verifier side, per round
    uint64_t bytes_p2 = 0;  // aircraft / prover side, per round
    uint64_t and_count = 0;
    bool comm_deterministic = false;  // bytes identical across repetitions
};

// One joint trajectory round (party 0 timed) over a loopback TCP pair.
BenchRecord bench_tracking(int k, int f, EngineMode mode, int reps, uint64_t seed);
// One range-proof round (verifier timed) over a loopback TCP pair. The
// proof protocol is the same under either session mode; `mode` only labels
// the record.
BenchRecord bench_proof(int k, int f, EngineMode mode, int reps, uint64_t seed);

// Fixed-header CSV: task,mode,k,median_ms,p95_ms,bytes_p1,bytes_p2,and_count
std::string bench_csv(std::span<const BenchRecord> records);
// Human-readable aligned table.
std::string bench_table(std::span<const BenchRecord> records);

}  // namespace skyveil

#endif
