#include "skyveil/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <thread>

#include "skyveil/channel.hpp"
#include "skyveil/circuit.hpp"
#include "skyveil/fleet.hpp"
#include "skyveil/messages.hpp"
#include "skyveil/zkrange.hpp"

namespace skyveil {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

// Nonnegative fixed-point value of at most `bits` significant bits.
FixedPoint random_fp(Rng& rng, FpParams p, int bits) {
    u128 raw = 0;
    rng.fill(std::span<uint8_t>(reinterpret_cast<uint8_t*>(&raw), sizeof raw));
    if (bits < 128) raw &= (u128(1) << bits) - 1;
    return FixedPoint::from_raw(raw, p);
}

Vec3 random_vec3(Rng& rng, FpParams p, int bits) {
    return Vec3{random_fp(rng, p, bits), random_fp(rng, p, bits),
                random_fp(rng, p, bits)};
}

struct RepStats {
    std::vector<double> times_ms;
    std::vector<uint64_t> bytes_p1, bytes_p2;
};

void fill_percentiles(BenchRecord& r, RepStats& s) {
    std::vector<double> t = s.times_ms;
    std::sort(t.begin(), t.end());
    const size_t n = t.size();
    r.median_ms = (n % 2) ? t[n / 2] : (t[n / 2 - 1] + t[n / 2]) / 2.0;
    size_t rank = (95 * n + 99) / 100;  // ceil(0.95 n), nearest-rank
    r.p95_ms = t[std::min(n - 1, rank == 0 ? 0 : rank - 1)];
    r.bytes_p1 = s.bytes_p1.front();
    r.bytes_p2 = s.bytes_p2.front();
    r.comm_deterministic =
        std::all_of(s.bytes_p1.begin(), s.bytes_p1.end(),
                    [&](uint64_t b) { return b == r.bytes_p1; }) &&
        std::all_of(s.bytes_p2.begin(), s.bytes_p2.end(),
                    [&](uint64_t b) { return b == r.bytes_p2; });
}

// Loopback TCP pair: the benchmark never leaves 127.0.0.1.
std::pair<std::unique_ptr<TcpChannel>, std::unique_ptr<TcpChannel>> loopback_pair() {
    TcpListener lst("127.0.0.1", 0);
    std::unique_ptr<TcpChannel> client;
    std::thread t([&] { client = TcpChannel::connect("127.0.0.1", lst.port()); });
    auto server = lst.accept(5000);
    t.join();
    if (!server || !client) throw Error("loopback pair setup failed");
    server->set_recv_timeout_ms(60000);
    client->set_recv_timeout_ms(60000);
    return {std::move(server), std::move(client)};
}

const char* mode_name(EngineMode m) {
    return m == EngineMode::semi_honest ? "semi" : "malicious";
}

}  // namespace

BenchRecord bench_tracking(int k, int f, EngineMode mode, int reps, uint64_t seed) {
    if (reps < 1) throw ConfigError("reps must be at least 1");
    FpParams p(static_cast<uint16_t>(k), static_cast<uint16_t>(f));
    Circuit circ = optimize(build_trajectory(p));
    CompiledCircuit cc = CompiledCircuit::compile(circ);

    BenchRecord rec;
    rec.task = "tracking";
    rec.mode = mode_name(mode);
    rec.k = k;
    rec.f = f;
    rec.reps = reps;
    rec.and_count = cc.and_count;

    auto krng = Rng::seeded(seed ^ 0xbe8c);
    GF128 d0 = GF128::zero(), d1 = GF128::zero();
    if (mode == EngineMode::malicious) {
        d0 = GF128::random(krng);
        d1 = GF128::random(krng);
    }
    // Fresh preprocessing per repetition so peak memory stays one round's
    // worth; inputs are pre-drawn so both threads read them race-free.
    std::vector<std::shared_ptr<DealerState>> states;
    std::vector<std::pair<Vec3, Vec3>> ins;
    auto irng = Rng::seeded(seed ^ 0x17ac);
    for (int i = 0; i < reps; ++i) {
        auto st = std::make_shared<DealerState>(Rng::seeded(seed * 1009 + i));
        st->set_delta(0, d0);
        st->set_delta(1, d1);
        states.push_back(std::move(st));
        ins.emplace_back(random_vec3(irng, p, p.k - 2),
                         random_vec3(irng, p, p.k - 2));
    }

    auto [ch0, ch1] = loopback_pair();
    RepStats stats;
    std::exception_ptr worker_err;
    std::thread worker([&] {
        try {
            // Own snapshot of the state handles: each side drops its reference
            // after its round, without touching the other's shared_ptr slots.
            std::vector<std::shared_ptr<DealerState>> mine = states;
            auto rng = Rng::seeded(seed * 31 + 1);
            for (int i = 0; i < reps; ++i) {
                uint64_t before = ch1->bytes_sent();
                ch1->expect(msg::TRACK_START);
                LocalDealerSource src(mine[static_cast<size_t>(i)], 1);
                aircraft_tracking_round(cc, mode, 1, *ch1, src, rng, d1,
                                        ins[static_cast<size_t>(i)].second);
                stats.bytes_p2.push_back(ch1->bytes_sent() - before);
                mine[static_cast<size_t>(i)].reset();
            }
        } catch (...) {
            worker_err = std::current_exception();
            ch1.reset();
        }
    });

    try {
        auto rng = Rng::seeded(seed * 31);
        for (int i = 0; i < reps; ++i) {
            uint64_t before = ch0->bytes_sent();
            LocalDealerSource src(states[static_cast<size_t>(i)], 0);
            auto t0 = Clock::now();
            satellite_tracking_round(cc, mode, 1, static_cast<uint64_t>(i) + 1, *ch0,
                                     src, rng, d0, ins[static_cast<size_t>(i)].first);
            stats.times_ms.push_back(ms_between(t0, Clock::now()));
            stats.bytes_p1.push_back(ch0->bytes_sent() - before);
            states[static_cast<size_t>(i)].reset();
        }
    } catch (...) {
        ch0.reset();
        worker.join();
        throw;
    }
    worker.join();
    if (worker_err) std::rethrow_exception(worker_err);

    fill_percentiles(rec, stats);
    return rec;
}

BenchRecord bench_proof(int k, int f, EngineMode mode, int reps, uint64_t seed) {
    if (reps < 1) throw ConfigError("reps must be at least 1");
    FpParams p(static_cast<uint16_t>(k), static_cast<uint16_t>(f));
    Circuit circ = optimize(build_range_check(p));

    BenchRecord rec;
    rec.task = "proof";
    rec.mode = mode_name(mode);
    rec.k = k;
    rec.f = f;
    rec.reps = reps;
    rec.and_count = circ.stats().and_count;

    auto krng = Rng::seeded(seed ^ 0x2fd3);
    GF128 zk_delta = GF128::random(krng);
    // Locations are nonnegative with k-2 significant bits; the box [0, 2^(k-2))
    // contains them all, so every session accepts.
    FixedPoint lo = FixedPoint::from_raw(0, p);
    FixedPoint hi = FixedPoint::from_raw((u128(1) << (p.k - 2)) - 1, p);
    Bounds bounds{lo, hi, lo, hi, lo, hi};

    std::vector<std::shared_ptr<DealerState>> states;
    std::vector<Vec3> locs;
    auto irng = Rng::seeded(seed ^ 0x3371);
    for (int i = 0; i < reps; ++i) {
        auto st = std::make_shared<DealerState>(Rng::seeded(seed * 2003 + i));
        st->set_zk_delta(zk_delta);
        states.push_back(std::move(st));
        locs.push_back(random_vec3(irng, p, p.k - 2));
    }

    auto [ch0, ch1] = loopback_pair();
    RepStats stats;
    std::exception_ptr worker_err;
    std::thread worker([&] {
        try {
            std::vector<std::shared_ptr<DealerState>> mine = states;
            for (int i = 0; i < reps; ++i) {
                uint64_t before = ch1->bytes_sent();
                LocalDealerSource src(mine[static_cast<size_t>(i)], 1);
                Verdict v = prove_range(circ, locs[static_cast<size_t>(i)], bounds,
                                        *ch1, 1, &src);
                if (v != Verdict::accepted) throw Error("benchmark proof rejected");
                stats.bytes_p2.push_back(ch1->bytes_sent() - before);
                mine[static_cast<size_t>(i)].reset();
            }
        } catch (...) {
            worker_err = std::current_exception();
            ch1.reset();
        }
    });

    try {
        auto rng = Rng::seeded(seed * 37);
        for (int i = 0; i < reps; ++i) {
            uint64_t before = ch0->bytes_sent();
            LocalDealerSource src(states[static_cast<size_t>(i)], 0);
            auto t0 = Clock::now();
            Verdict v = verify_range(circ, bounds, zk_delta, *ch0, 1, &src, rng);
            stats.times_ms.push_back(ms_between(t0, Clock::now()));
            if (v != Verdict::accepted) throw Error("benchmark proof rejected");
            stats.bytes_p1.push_back(ch0->bytes_sent() - before);
            states[static_cast<size_t>(i)].reset();
        }
    } catch (...) {
        ch0.reset();
        worker.join();
        throw;
    }
    worker.join();
    if (worker_err) std::rethrow_exception(worker_err);

    fill_percentiles(rec, stats);
    return rec;
}

std::string bench_csv(std::span<const BenchRecord> records) {
    std::string out = "task,mode,k,median_ms,p95_ms,bytes_p1,bytes_p2,and_count\n";
    char line[256];
    for (const BenchRecord& r : records) {
        std::snprintf(line, sizeof line, "%s,%s,%d,%.3f,%.3f,%llu,%llu,%llu\n",
                      r.task.c_str(), r.mode.c_str(), r.k, r.median_ms, r.p95_ms,
                      static_cast<unsigned long long>(r.bytes_p1),
                      static_cast<unsigned long long>(r.bytes_p2),
                      static_cast<unsigned long long>(r.and_count));
        out += line;
    }
    return out;
}

std::string bench_table(std::span<const BenchRecord> records) {
    std::string out =
        "task      mode       k    median_ms    p95_ms    bytes_p1    bytes_p2    "
        "ANDs\n";
    char line[256];
    for (const BenchRecord& r : records) {
        std::snprintf(line, sizeof line,
                      "%-9s %-9s %4d %12.3f %9.3f %11llu %11llu %7llu\n",
                      r.task.c_str(), r.mode.c_str(), r.k, r.median_ms, r.p95_ms,
                      static_cast<unsigned long long>(r.bytes_p1),
                      static_cast<unsigned long long>(r.bytes_p2),
                      static_cast<unsigned long long>(r.and_count));
        out += line;
    }
    return out;
}

}  // namespace skyveil
