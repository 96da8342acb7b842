#ifndef SKYVEIL_FLEET_HPP
#define SKYVEIL_FLEET_HPP

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "skyveil/channel.hpp"
#include "skyveil/circuit.hpp"
#include "skyveil/fixedpoint.hpp"
#include "skyveil/messages.hpp"
#include "skyveil/smpc.hpp"
#include "skyveil/zkrange.hpp"

namespace skyveil {

// The networked session layer: a satellite node tracks many aircraft over
// TCP, alternating two kinds of rounds per session — joint trajectory
// computation (the satellite alone learns the unit vector) and range proofs
// (the aircraft proves it is inside satellite-issued bounds). A dealer node
// hands both parties their halves of the preprocessing. SATCOM is modeled by
// length-prefixed frames over TCP; an optional transport-encryption wrapper
// adds defense in depth.

// ---------------------------------------------------------------------------
// Session configuration and handshake

struct SessionConfig {
    uint16_t version = kProtocolVersion;
    FpParams params{32, 16};
    EngineMode mode = EngineMode::semi_honest;
    uint32_t tracking_interval_ms = 2000;
    uint32_t proof_interval_ms = 5000;
    bool secure_transport = false;
    Digest32 trajectory_digest{};
    Digest32 range_digest{};

    // Fills the circuit digests by synthesizing both circuits for `params`.
    static SessionConfig make(FpParams p, EngineMode mode, uint32_t tracking_ms,
                              uint32_t proof_ms, bool secure = false);

    std::vector<uint8_t> encode() const;
    static SessionConfig decode(std::span<const uint8_t> payload);
    bool operator==(const SessionConfig&) const = default;
};

// Aircraft side: HELLO out, CONFIG in (byte-compared against `proposed`),
// CFG_ACK out. Returns the satellite-assigned session id. Throws ConfigError
// on any disagreement.
uint64_t handshake_connect(Channel& ch, const SessionConfig& proposed,
                           const std::string& aircraft_id);
// Satellite side: HELLO in, CONFIG out, CFG_ACK verified. Returns the
// aircraft id. `sid` becomes the session id for all subsequent frames.
std::string handshake_accept(Channel& ch, const SessionConfig& proposed, uint64_t sid);

// ---------------------------------------------------------------------------
// Bounds on the wire

std::vector<uint8_t> encode_bounds_update(const Bounds& b);
// Validates parameter agreement, bit arity, and min <= max per axis; throws
// ProtocolError on violation (the caller answers with BOUNDS_INVALID).
Bounds decode_bounds_update(std::span<const uint8_t> payload, FpParams expect);

// ---------------------------------------------------------------------------
// Antenna pointing state (satellite side)

// |sum raw_i^2 - 2^(2f)| <= 2^(f+3); false for the all-zero vector.
bool unit_norm_ok(const Vec3& u);

struct AntennaState {
    std::optional<Vec3> u;
    bool fault = false;  // degenerate all-zero result or norm out of tolerance
    uint64_t updates = 0;

    void update(const Vec3& next);
};

// ---------------------------------------------------------------------------
// Logging (capture-friendly for hygiene tests)

class LogSink {
public:
    explicit LogSink(bool echo_stderr = false) : echo_(echo_stderr) {}
    void line(const std::string& s);
    std::vector<std::string> lines() const;

private:
    mutable std::mutex m_;
    std::vector<std::string> lines_;
    bool echo_;
};

// ---------------------------------------------------------------------------
// Fleet bookkeeping (satellite side)

enum class SessionStatus : uint8_t { handshaking, active, quarantined, closed };
const char* session_status_name(SessionStatus s);

struct VerdictRecord {
    int64_t t_ms;
    Verdict v;
};

struct AlertRecord {
    int64_t t_ms;
    std::string aircraft;
    std::string kind;
};

struct AircraftInfo {
    std::string id;
    uint64_t sid = 0;
    SessionStatus status = SessionStatus::handshaking;
    uint64_t tracking_rounds = 0;
    uint64_t proof_rounds = 0;
    uint64_t missed_rounds = 0;
    std::optional<Vec3> last_u;
    bool antenna_fault = false;
    std::optional<Verdict> last_verdict;
    int64_t last_verdict_ms = 0;
    std::optional<Bounds> bounds;
    size_t verdict_count = 0;
};

class FleetState {
public:
    uint64_t open_session(const std::string& id);  // returns a fresh sid
    void set_id(uint64_t sid, const std::string& id);
    void activate(uint64_t sid, const Bounds& initial);
    void set_status(uint64_t sid, SessionStatus s);
    void record_u(uint64_t sid, const Vec3& u, bool fault);
    void record_tracking_fault(uint64_t sid);
    void record_verdict(uint64_t sid, Verdict v, int64_t t_ms);
    void record_missed(uint64_t sid);
    void set_bounds(uint64_t sid, const Bounds& b);
    void alert(int64_t t_ms, const std::string& aircraft, const std::string& kind);

    // Operator API: queued, applied by the session between rounds (never
    // mid-proof). False when the aircraft id is unknown.
    bool queue_bounds(const std::string& id, const Bounds& b);
    std::optional<Bounds> take_pending_bounds(uint64_t sid);

    std::vector<AircraftInfo> list() const;
    std::optional<AircraftInfo> by_id(const std::string& id) const;
    std::vector<VerdictRecord> verdicts(uint64_t sid) const;  // append-only
    std::vector<AlertRecord> alerts() const;

private:
    struct Entry {
        AircraftInfo info;
        std::vector<VerdictRecord> history;
        std::optional<Bounds> pending;
    };
    Entry* find(uint64_t sid);

    mutable std::mutex m_;
    std::map<uint64_t, Entry> sessions_;
    std::vector<AlertRecord> alerts_;
    uint64_t next_sid_ = 1;
};

// ---------------------------------------------------------------------------
// Preprocessing plumbing

// Buffered range-proof triples for one side, filled ahead of a round.
class ZkPoolSource : public ZkTripleSource {
public:
    void add_prover(std::vector<ZkTripleProver> v);
    void add_verifier(std::vector<ZkTripleVerifier> v);
    std::vector<ZkTripleProver> zk_prover_triples(size_t n) override;
    std::vector<ZkTripleVerifier> zk_verifier_triples(size_t n) override;

private:
    std::vector<ZkTripleProver> pv_;
    std::vector<ZkTripleVerifier> vv_;
    size_t pat_ = 0, vat_ = 0;
};

// Round provisioning with slack: requests ceil(count * 1.1) so a round never
// runs dry on an exact-count source.
size_t slacked(size_t count);

// Registers this party with a dealer node: HELLO carrying the party's 2PC
// key (zero when semi-honest) and, for the satellite, the proof global key;
// waits for the dealer's acknowledgment.
void dealer_hello(Channel& ch, uint64_t sid, int party, const GF128& delta,
                  const GF128& zk_delta);

// ---------------------------------------------------------------------------
// Round drivers (shared by the nodes, unit-testable over loopback channels)

constexpr uint8_t kRoundTracking = 0;
constexpr uint8_t kRoundProof = 1;

// Nearest previous point of a time-sorted path; clamps before the first
// point and holds the last one forever.
Vec3 path_location_at(const std::vector<PathPoint>& path, int64_t t_ms);

struct TrackingResult {
    Vec3 u;
    bool fault = false;
};

// Satellite side of one tracking round: announces the round, runs the
// trajectory circuit as party 0, and is the only receiver of the result.
TrackingResult satellite_tracking_round(const CompiledCircuit& cc, EngineMode mode,
                                        uint64_t sid, uint64_t round_no, Channel& ch,
                                        TripleSource& src, Rng& rng, const GF128& delta,
                                        const Vec3& sat_loc);
// Aircraft side (party 1); call after consuming the round's TRACK_START. The
// trajectory result never reaches this party.
void aircraft_tracking_round(const CompiledCircuit& cc, EngineMode mode, uint64_t sid,
                             Channel& ch, TripleSource& src, Rng& rng,
                             const GF128& delta, const Vec3& air_loc);

// ---------------------------------------------------------------------------
// Nodes

struct SatelliteOptions {
    SessionConfig config;
    Vec3 location;          // own position; onboard navigation is assumed and
                            // modeled by configuration
    Bounds initial_bounds;  // default box; per-aircraft overrides below
    std::map<std::string, Bounds> bounds_overrides{};
    std::string listen_host = "127.0.0.1";
    uint16_t listen_port = 0;  // 0 = ephemeral
    std::string status_host = "127.0.0.1";
    uint16_t status_port = 0;
    std::string dealer_host = "127.0.0.1";
    uint16_t dealer_port = 0;
    int recv_timeout_ms = 10000;
    LogSink* log = nullptr;
};

class SatelliteNode {
public:
    explicit SatelliteNode(SatelliteOptions opt);
    ~SatelliteNode();

    void start();
    void stop();
    uint16_t port() const;
    uint16_t status_port() const;
    FleetState& fleet() { return fleet_; }
    bool update_bounds(const std::string& aircraft_id, const Bounds& b);

private:
    void accept_loop();
    void status_loop();
    void session_main(std::unique_ptr<Channel> ch);
    void run_session(Channel& ch, const std::string& id, uint64_t sid);
    bool flush_bounds(Channel& ch, uint64_t sid);
    void log(const std::string& s);
    std::string status_reply(const std::string& request_line);

    SatelliteOptions opt_;
    Circuit track_circ_;
    CompiledCircuit track_cc_;
    Circuit range_circ_;
    FleetState fleet_;
    LogSink own_log_;
    std::unique_ptr<TcpListener> listener_;
    std::unique_ptr<TcpListener> status_listener_;
    std::atomic<bool> stop_{false};
    std::thread accept_thread_;
    std::thread status_thread_;
    std::mutex threads_m_;
    std::vector<std::thread> session_threads_;
};

struct AircraftOptions {
    std::string id = "aircraft";
    SessionConfig config;
    std::vector<PathPoint> path;  // replayed nearest-previous from session start
    std::string satellite_host = "127.0.0.1";
    uint16_t satellite_port = 0;
    std::string dealer_host = "127.0.0.1";
    uint16_t dealer_port = 0;
    int recv_timeout_ms = 10000;
    LogSink* log = nullptr;
};

// Why an aircraft session ended; process exit codes derive from this.
enum class RunResult {
    stopped,                // stop() was called; clean local shutdown
    link_closed,            // satellite hung up without an ERROR frame
    torn_down,              // satellite sent ERROR, or repeated round failures
    setup_config_failed,    // handshake rejected the session parameters
    setup_protocol_failed,  // connect/handshake failed before any round ran
};

class AircraftNode {
public:
    explicit AircraftNode(AircraftOptions opt);

    // Blocking: connect, handshake, serve rounds until teardown or stop().
    RunResult run();
    void stop();  // abrupt from the peer's perspective: no goodbye frame

    uint64_t tracking_rounds() const { return tracking_rounds_.load(); }
    uint64_t proof_rounds() const { return proof_rounds_.load(); }
    std::optional<Verdict> last_verdict() const;

private:
    Vec3 location_at(int64_t t_ms) const;
    void log(const std::string& s);

    AircraftOptions opt_;
    Circuit track_circ_;
    CompiledCircuit track_cc_;
    Circuit range_circ_;
    LogSink own_log_;
    std::atomic<bool> stop_{false};
    std::atomic<uint64_t> tracking_rounds_{0};
    std::atomic<uint64_t> proof_rounds_{0};
    mutable std::mutex m_;
    std::optional<Verdict> last_verdict_;
};

struct DealerNodeOptions {
    std::string host = "127.0.0.1";
    uint16_t port = 0;
    int recv_timeout_ms = 10000;
    LogSink* log = nullptr;
};

class DealerNode {
public:
    explicit DealerNode(DealerNodeOptions opt);
    ~DealerNode();

    void start();
    void stop();
    uint16_t port() const;

private:
    void accept_loop();
    void serve(std::unique_ptr<TcpChannel> ch);
    std::shared_ptr<DealerState> acquire(uint64_t sid, int party, const GF128& delta,
                                         const GF128& zk_delta);
    void release(uint64_t sid);
    void log(const std::string& s);

    DealerNodeOptions opt_;
    LogSink own_log_;
    std::unique_ptr<TcpListener> listener_;
    std::atomic<bool> stop_{false};
    std::thread accept_thread_;
    std::mutex threads_m_;
    std::vector<std::thread> conn_threads_;
    std::mutex m_;
    struct SessionSlot {
        std::shared_ptr<DealerState> state;
        int refs = 0;
    };
    std::map<uint64_t, SessionSlot> sessions_;
};

// ---------------------------------------------------------------------------
// key=value configuration files ('#' comments, blank lines ignored)

class KvConfig {
public:
    static KvConfig load(const std::string& path);       // ParseError on bad line
    static KvConfig parse(std::string_view text);

    bool has(const std::string& key) const;
    std::string str(const std::string& key) const;       // ConfigError if missing
    std::string str_or(const std::string& key, const std::string& def) const;
    int64_t num(const std::string& key, int64_t def) const;
    bool flag(const std::string& key, bool def) const;

    const std::map<std::string, std::string>& values() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

// "host:port" -> pair; throws ConfigError on malformed input
std::pair<std::string, uint16_t> parse_hostport(const std::string& text);
// "x,y,z" decimal reals
Vec3 parse_vec3(const std::string& text, FpParams p);
// "xmin,xmax,ymin,ymax,zmin,zmax" decimal reals; min <= max enforced
Bounds parse_bounds(const std::string& text, FpParams p);

}  // namespace skyveil

#endif
