#include "skyveil/fleet.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "skyveil/hashing.hpp"
#include "skyveil/wire.hpp"

namespace skyveil {

namespace {

using Clock = std::chrono::steady_clock;

int64_t ms_since(Clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0)
        .count();
}

std::vector<uint8_t> pack_vec3_bits(const Vec3& v) {
    std::vector<uint8_t> out;
    const int k = v.params().k;
    out.reserve(static_cast<size_t>(3 * k));
    for (const FixedPoint& c : v.comps())
        for (int i = 0; i < k; ++i) out.push_back(c.bit(i));
    return out;
}

FixedPoint fp_from_bits(std::span<const uint8_t> bits, FpParams p) {
    return FixedPoint::from_raw(u128_from_bits(bits), p);
}

Vec3 vec3_from_bits(std::span<const uint8_t> bits, FpParams p) {
    const size_t k = static_cast<size_t>(p.k);
    return Vec3{fp_from_bits(bits.subspan(0, k), p),
                fp_from_bits(bits.subspan(k, k), p),
                fp_from_bits(bits.subspan(2 * k, k), p)};
}

uint8_t mode_code(EngineMode m) {
    return m == EngineMode::semi_honest ? 0 : 1;
}

EngineMode mode_from_code(uint8_t c) {
    if (c == 0) return EngineMode::semi_honest;
    if (c == 1) return EngineMode::malicious;
    throw ProtocolError("unknown engine mode code");
}

// Both parties fetch identical (slacked) preprocessing counts per round so
// their dealer cursors stay aligned.
void provision_tracking(PoolSource& pool, TripleSource& dealer, EngineMode mode,
                        const CompiledCircuit& cc, const Circuit& circ) {
    if (mode == EngineMode::semi_honest) {
        pool.add_semi(dealer.semi_triples(slacked(cc.and_count)));
    } else {
        pool.add_auth(dealer.auth_triples(slacked(cc.and_count)));
        pool.add_auth_bits(dealer.auth_bits(slacked(circ.input_bits())));
    }
}

void send_bounds_update(Channel& ch, uint64_t sid, const Bounds& b) {
    auto payload = encode_bounds_update(b);
    ch.send(Frame{msg::BOUNDS_UPDATE, sid, payload});
    Frame ack = ch.expect(msg::BOUNDS_ACK);
    Reader r(ack.payload);
    auto dg = r.raw(32);
    r.expect_end();
    Digest32 want = blake2b256("bounds", payload);
    if (!std::equal(dg.begin(), dg.end(), want.begin()))
        throw ProtocolError("bounds acknowledgement mismatch");
}

std::string format_bounds(const Bounds& b) {
    auto c = b.comps();
    std::string s;
    for (int axis = 0; axis < 3; ++axis) {
        s += "[" + c[2 * axis].to_decimal() + "," + c[2 * axis + 1].to_decimal() + "]";
    }
    return s;
}

std::string trim(std::string_view v) {
    size_t a = v.find_first_not_of(" \t\r\n");
    if (a == std::string_view::npos) return "";
    size_t b = v.find_last_not_of(" \t\r\n");
    return std::string(v.substr(a, b - a + 1));
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    size_t at = 0;
    while (true) {
        size_t next = text.find(sep, at);
        if (next == std::string::npos) {
            out.push_back(trim(text.substr(at)));
            return out;
        }
        out.push_back(trim(text.substr(at, next - at)));
        at = next + 1;
    }
}

bool valid_aircraft_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                  (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
        if (!ok) return false;
    }
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// SessionConfig

SessionConfig SessionConfig::make(FpParams p, EngineMode mode, uint32_t tracking_ms,
                                  uint32_t proof_ms, bool secure) {
    SessionConfig c;
    c.params = p;
    c.mode = mode;
    c.tracking_interval_ms = tracking_ms;
    c.proof_interval_ms = proof_ms;
    c.secure_transport = secure;
    c.trajectory_digest = circuit_digest(optimize(build_trajectory(p)));
    c.range_digest = circuit_digest(optimize(build_range_check(p)));
    return c;
}

std::vector<uint8_t> SessionConfig::encode() const {
    Writer w;
    w.u16(version);
    w.u16(static_cast<uint16_t>(params.k));
    w.u16(static_cast<uint16_t>(params.f));
    w.u8(mode_code(mode));
    w.u32(tracking_interval_ms);
    w.u32(proof_interval_ms);
    w.u8(secure_transport ? 1 : 0);
    w.bytes(trajectory_digest);
    w.bytes(range_digest);
    return w.take();
}

SessionConfig SessionConfig::decode(std::span<const uint8_t> payload) {
    Reader r(payload);
    uint16_t version = r.u16();
    uint16_t k = r.u16();
    uint16_t f = r.u16();
    uint8_t mode = r.u8();
    uint32_t t_ms = r.u32();
    uint32_t p_ms = r.u32();
    uint8_t secure = r.u8();
    auto td = r.raw(32);
    auto rd = r.raw(32);
    r.expect_end();
    SessionConfig c;
    try {
        c.params = FpParams(k, f);
    } catch (const std::invalid_argument& e) {
        throw ProtocolError(std::string("bad fixed-point parameters: ") + e.what());
    }
    c.version = version;
    c.mode = mode_from_code(mode);
    c.tracking_interval_ms = t_ms;
    c.proof_interval_ms = p_ms;
    c.secure_transport = secure != 0;
    std::copy(td.begin(), td.end(), c.trajectory_digest.begin());
    std::copy(rd.begin(), rd.end(), c.range_digest.begin());
    return c;
}

// ---------------------------------------------------------------------------
// Handshake

uint64_t handshake_connect(Channel& ch, const SessionConfig& proposed,
                           const std::string& aircraft_id) {
    if (!valid_aircraft_id(aircraft_id))
        throw ConfigError("aircraft id must be 1-64 chars of [A-Za-z0-9._-]");
    Writer w;
    w.u16(proposed.version);
    w.str(aircraft_id);
    ch.send(Frame{msg::HELLO, 0, w.take()});

    Frame cfg = ch.expect(msg::CONFIG);
    if (cfg.payload != proposed.encode()) {
        try {
            ch.send_error(cfg.session_id, errcode::CFG_MISMATCH,
                          "session configuration differs");
        } catch (const Error&) {
        }
        throw ConfigError("session configuration differs from the satellite's");
    }
    Digest32 dg = blake2b256("session-config", cfg.payload);
    Writer a;
    a.bytes(dg);
    ch.send(Frame{msg::CFG_ACK, cfg.session_id, a.take()});
    return cfg.session_id;
}

std::string handshake_accept(Channel& ch, const SessionConfig& proposed, uint64_t sid) {
    Frame hello = ch.expect(msg::HELLO);
    Reader r(hello.payload);
    uint16_t ver = r.u16();
    std::string id = r.str();
    r.expect_end();
    if (ver != proposed.version) {
        try {
            ch.send_error(sid, errcode::CFG_MISMATCH, "protocol version mismatch");
        } catch (const Error&) {
        }
        throw ConfigError("peer speaks protocol version " + std::to_string(ver));
    }
    if (!valid_aircraft_id(id)) {
        try {
            ch.send_error(sid, errcode::CFG_MISMATCH, "malformed aircraft id");
        } catch (const Error&) {
        }
        throw ProtocolError("malformed aircraft id in HELLO");
    }
    auto bytes = proposed.encode();
    ch.send(Frame{msg::CONFIG, sid, bytes});
    Frame ack = ch.expect(msg::CFG_ACK);
    Reader ar(ack.payload);
    auto dg = ar.raw(32);
    ar.expect_end();
    Digest32 want = blake2b256("session-config", bytes);
    if (!std::equal(dg.begin(), dg.end(), want.begin()))
        throw ProtocolError("configuration acknowledgement mismatch");
    return id;
}

// ---------------------------------------------------------------------------
// Bounds on the wire

std::vector<uint8_t> encode_bounds_update(const Bounds& b) {
    Writer w;
    w.u16(static_cast<uint16_t>(b.params().k));
    w.u16(static_cast<uint16_t>(b.params().f));
    w.bits(range_public_bits(b));
    return w.take();
}

Bounds decode_bounds_update(std::span<const uint8_t> payload, FpParams expect) {
    Reader r(payload);
    uint16_t k = r.u16();
    uint16_t f = r.u16();
    if (k != expect.k || f != expect.f)
        throw ProtocolError("bounds fixed-point parameters differ from the session's");
    auto bits = r.bits();
    r.expect_end();
    if (bits.size() != 6u * static_cast<size_t>(expect.k))
        throw ProtocolError("bounds bit arity mismatch");
    std::vector<FixedPoint> c;
    std::span<const uint8_t> s(bits);
    for (int i = 0; i < 6; ++i)
        c.push_back(fp_from_bits(s.subspan(static_cast<size_t>(i) * expect.k,
                                           static_cast<size_t>(expect.k)),
                                 expect));
    for (int axis = 0; axis < 3; ++axis)
        if (c[2 * axis].signed_raw() > c[2 * axis + 1].signed_raw())
            throw ProtocolError("bounds rejected: min exceeds max");
    return Bounds{c[0], c[1], c[2], c[3], c[4], c[5]};
}

// ---------------------------------------------------------------------------
// Antenna state

bool unit_norm_ok(const Vec3& u) {
    FpParams p = u.params();
    mpz_class norm2 = 0;
    for (const FixedPoint& c : u.comps()) {
        mpz_class r = c.signed_raw();
        norm2 += r * r;
    }
    if (norm2 == 0) return false;
    mpz_class target = mpz_class(1) << (2 * p.f);
    mpz_class dev = norm2 - target;
    if (dev < 0) dev = -dev;
    return dev <= (mpz_class(1) << (p.f + 3));
}

void AntennaState::update(const Vec3& next) {
    u = next;
    ++updates;
    fault = !unit_norm_ok(next);
}

// ---------------------------------------------------------------------------
// LogSink

void LogSink::line(const std::string& s) {
    std::lock_guard<std::mutex> lk(m_);
    lines_.push_back(s);
    if (echo_) std::fprintf(stderr, "%s\n", s.c_str());
}

std::vector<std::string> LogSink::lines() const {
    std::lock_guard<std::mutex> lk(m_);
    return lines_;
}

// ---------------------------------------------------------------------------
// FleetState

const char* session_status_name(SessionStatus s) {
    switch (s) {
        case SessionStatus::handshaking: return "handshaking";
        case SessionStatus::active: return "active";
        case SessionStatus::quarantined: return "quarantined";
        case SessionStatus::closed: return "closed";
    }
    return "unknown";
}

FleetState::Entry* FleetState::find(uint64_t sid) {
    auto it = sessions_.find(sid);
    return it == sessions_.end() ? nullptr : &it->second;
}

uint64_t FleetState::open_session(const std::string& id) {
    std::lock_guard<std::mutex> lk(m_);
    uint64_t sid = next_sid_++;
    Entry e;
    e.info.id = id;
    e.info.sid = sid;
    sessions_.emplace(sid, std::move(e));
    return sid;
}

void FleetState::set_id(uint64_t sid, const std::string& id) {
    std::lock_guard<std::mutex> lk(m_);
    if (Entry* e = find(sid)) e->info.id = id;
}

void FleetState::activate(uint64_t sid, const Bounds& initial) {
    std::lock_guard<std::mutex> lk(m_);
    if (Entry* e = find(sid)) {
        e->info.status = SessionStatus::active;
        e->info.bounds = initial;
    }
}

void FleetState::set_status(uint64_t sid, SessionStatus s) {
    std::lock_guard<std::mutex> lk(m_);
    if (Entry* e = find(sid)) {
        // Quarantine is terminal; a later "closed" must not mask it.
        if (e->info.status == SessionStatus::quarantined && s == SessionStatus::closed)
            return;
        e->info.status = s;
    }
}

void FleetState::record_u(uint64_t sid, const Vec3& u, bool fault) {
    std::lock_guard<std::mutex> lk(m_);
    if (Entry* e = find(sid)) {
        e->info.last_u = u;
        e->info.antenna_fault = fault;
        ++e->info.tracking_rounds;
    }
}

void FleetState::record_tracking_fault(uint64_t sid) {
    std::lock_guard<std::mutex> lk(m_);
    if (Entry* e = find(sid)) {
        e->info.antenna_fault = true;
        ++e->info.tracking_rounds;
    }
}

void FleetState::record_verdict(uint64_t sid, Verdict v, int64_t t_ms) {
    std::lock_guard<std::mutex> lk(m_);
    if (Entry* e = find(sid)) {
        e->history.push_back(VerdictRecord{t_ms, v});
        e->info.last_verdict = v;
        e->info.last_verdict_ms = t_ms;
        e->info.verdict_count = e->history.size();
        ++e->info.proof_rounds;
    }
}

void FleetState::record_missed(uint64_t sid) {
    std::lock_guard<std::mutex> lk(m_);
    if (Entry* e = find(sid)) ++e->info.missed_rounds;
}

void FleetState::set_bounds(uint64_t sid, const Bounds& b) {
    std::lock_guard<std::mutex> lk(m_);
    if (Entry* e = find(sid)) e->info.bounds = b;
}

void FleetState::alert(int64_t t_ms, const std::string& aircraft,
                       const std::string& kind) {
    std::lock_guard<std::mutex> lk(m_);
    alerts_.push_back(AlertRecord{t_ms, aircraft, kind});
}

bool FleetState::queue_bounds(const std::string& id, const Bounds& b) {
    std::lock_guard<std::mutex> lk(m_);
    for (auto& [sid, e] : sessions_) {
        if (e.info.id == id && e.info.status == SessionStatus::active) {
            e.pending = b;
            return true;
        }
    }
    return false;
}

std::optional<Bounds> FleetState::take_pending_bounds(uint64_t sid) {
    std::lock_guard<std::mutex> lk(m_);
    Entry* e = find(sid);
    if (!e || !e->pending) return std::nullopt;
    std::optional<Bounds> out = std::move(e->pending);
    e->pending.reset();
    return out;
}

std::vector<AircraftInfo> FleetState::list() const {
    std::lock_guard<std::mutex> lk(m_);
    std::vector<AircraftInfo> out;
    out.reserve(sessions_.size());
    for (const auto& [sid, e] : sessions_) out.push_back(e.info);
    return out;
}

std::optional<AircraftInfo> FleetState::by_id(const std::string& id) const {
    std::lock_guard<std::mutex> lk(m_);
    // Prefer the most recent session for a reconnecting id.
    std::optional<AircraftInfo> out;
    for (const auto& [sid, e] : sessions_)
        if (e.info.id == id) out = e.info;
    return out;
}

std::vector<VerdictRecord> FleetState::verdicts(uint64_t sid) const {
    std::lock_guard<std::mutex> lk(m_);
    auto it = sessions_.find(sid);
    if (it == sessions_.end()) return {};
    return it->second.history;
}

std::vector<AlertRecord> FleetState::alerts() const {
    std::lock_guard<std::mutex> lk(m_);
    return alerts_;
}

// ---------------------------------------------------------------------------
// Preprocessing plumbing

void ZkPoolSource::add_prover(std::vector<ZkTripleProver> v) {
    pv_.insert(pv_.end(), v.begin(), v.end());
}

void ZkPoolSource::add_verifier(std::vector<ZkTripleVerifier> v) {
    vv_.insert(vv_.end(), v.begin(), v.end());
}

std::vector<ZkTripleProver> ZkPoolSource::zk_prover_triples(size_t n) {
    if (pv_.size() - pat_ < n) throw Error("triple pool exhausted");
    std::vector<ZkTripleProver> out(pv_.begin() + static_cast<long>(pat_),
                                    pv_.begin() + static_cast<long>(pat_ + n));
    pat_ += n;
    return out;
}

std::vector<ZkTripleVerifier> ZkPoolSource::zk_verifier_triples(size_t n) {
    if (vv_.size() - vat_ < n) throw Error("triple pool exhausted");
    std::vector<ZkTripleVerifier> out(vv_.begin() + static_cast<long>(vat_),
                                      vv_.begin() + static_cast<long>(vat_ + n));
    vat_ += n;
    return out;
}

size_t slacked(size_t count) {
    return count + (count + 9) / 10;
}

void dealer_hello(Channel& ch, uint64_t sid, int party, const GF128& delta,
                  const GF128& zk_delta) {
    Writer w;
    w.u16(kProtocolVersion);
    w.u8(static_cast<uint8_t>(party));
    w.gf(delta);
    w.gf(zk_delta);
    ch.send(Frame{msg::HELLO, sid, w.take()});
    ch.expect(msg::CFG_ACK);
}

// ---------------------------------------------------------------------------
// Round drivers

Vec3 path_location_at(const std::vector<PathPoint>& path, int64_t t_ms) {
    if (path.empty()) throw ConfigError("flight path is empty");
    const PathPoint* best = &path.front();
    for (const PathPoint& pt : path) {
        if (pt.t_ms <= t_ms)
            best = &pt;
        else
            break;
    }
    return best->pos;
}

TrackingResult satellite_tracking_round(const CompiledCircuit& cc, EngineMode mode,
                                        uint64_t sid, uint64_t round_no, Channel& ch,
                                        TripleSource& src, Rng& rng, const GF128& delta,
                                        const Vec3& sat_loc) {
    Writer w;
    w.u64(round_no);
    w.u8(kRoundTracking);
    ch.send(Frame{msg::TRACK_START, sid, w.take()});

    Engine eng(cc, mode, 0, sid, ch, src, rng, delta);
    eng.share_inputs(pack_vec3_bits(sat_loc));
    eng.evaluate();
    auto out = eng.reveal_to(0);
    FpParams p = sat_loc.params();
    if (out.size() != 3u * static_cast<size_t>(p.k))
        throw ProtocolError("trajectory output arity mismatch");
    Vec3 u = vec3_from_bits(out, p);
    return TrackingResult{u, !unit_norm_ok(u)};
}

void aircraft_tracking_round(const CompiledCircuit& cc, EngineMode mode, uint64_t sid,
                             Channel& ch, TripleSource& src, Rng& rng,
                             const GF128& delta, const Vec3& air_loc) {
    Engine eng(cc, mode, 1, sid, ch, src, rng, delta);
    eng.share_inputs(pack_vec3_bits(air_loc));
    eng.evaluate();
    auto out = eng.reveal_to(0);
    if (!out.empty()) throw ProtocolError("trajectory result leaked to the aircraft");
}

// ---------------------------------------------------------------------------
// SatelliteNode

SatelliteNode::SatelliteNode(SatelliteOptions opt)
    : opt_(std::move(opt)),
      track_circ_(optimize(build_trajectory(opt_.config.params))),
      track_cc_(CompiledCircuit::compile(track_circ_)),
      range_circ_(optimize(build_range_check(opt_.config.params))) {
    if (!(opt_.location.params() == opt_.config.params))
        throw ConfigError("satellite location parameters differ from the session's");
    if (!(opt_.initial_bounds.params() == opt_.config.params))
        throw ConfigError("bounds parameters differ from the session's");
}

SatelliteNode::~SatelliteNode() {
    stop();
}

void SatelliteNode::log(const std::string& s) {
    (opt_.log ? *opt_.log : own_log_).line(s);
}

void SatelliteNode::start() {
    listener_ = std::make_unique<TcpListener>(opt_.listen_host, opt_.listen_port);
    status_listener_ = std::make_unique<TcpListener>(opt_.status_host, opt_.status_port);
    log("satellite listening port=" + std::to_string(listener_->port()) +
        " status_port=" + std::to_string(status_listener_->port()));
    accept_thread_ = std::thread([this] { accept_loop(); });
    status_thread_ = std::thread([this] { status_loop(); });
}

void SatelliteNode::stop() {
    if (stop_.exchange(true)) {
        return;
    }
    if (listener_) listener_->close();
    if (status_listener_) status_listener_->close();
    if (accept_thread_.joinable()) accept_thread_.join();
    if (status_thread_.joinable()) status_thread_.join();
    std::lock_guard<std::mutex> lk(threads_m_);
    for (auto& t : session_threads_)
        if (t.joinable()) t.join();
    session_threads_.clear();
}

uint16_t SatelliteNode::port() const {
    return listener_ ? listener_->port() : 0;
}

uint16_t SatelliteNode::status_port() const {
    return status_listener_ ? status_listener_->port() : 0;
}

bool SatelliteNode::update_bounds(const std::string& aircraft_id, const Bounds& b) {
    if (!(b.params() == opt_.config.params)) return false;
    return fleet_.queue_bounds(aircraft_id, b);
}

void SatelliteNode::accept_loop() {
    while (!stop_) {
        std::unique_ptr<TcpChannel> ch;
        try {
            ch = listener_->accept(100);
        } catch (const Error&) {
            if (stop_) break;
            continue;
        }
        if (!ch) continue;
        std::lock_guard<std::mutex> lk(threads_m_);
        session_threads_.emplace_back(
            [this](std::unique_ptr<Channel> c) { session_main(std::move(c)); },
            std::unique_ptr<Channel>(std::move(ch)));
    }
}

void SatelliteNode::session_main(std::unique_ptr<Channel> ch) {
    uint64_t sid = 0;
    try {
        ch->set_recv_timeout_ms(opt_.recv_timeout_ms);
        if (opt_.config.secure_transport)
            ch = std::make_unique<SecureChannel>(std::move(ch), false);
        // The id is only known after HELLO, but CONFIG must carry the session
        // id; reserve it first.
        sid = fleet_.open_session("");
        std::string id = handshake_accept(*ch, opt_.config, sid);
        fleet_.set_id(sid, id);
        log("session sid=" + std::to_string(sid) + " id=" + id + " handshake complete");
        run_session(*ch, id, sid);
    } catch (const Error& e) {
        log("session sid=" + std::to_string(sid) + " ended: " + e.what());
        if (sid) fleet_.set_status(sid, SessionStatus::closed);
    } catch (const std::exception& e) {
        log("session sid=" + std::to_string(sid) + " internal error: " + e.what());
        if (sid) fleet_.set_status(sid, SessionStatus::closed);
    }
}

bool SatelliteNode::flush_bounds(Channel& ch, uint64_t sid) {
    auto pending = fleet_.take_pending_bounds(sid);
    if (!pending) return true;
    try {
        send_bounds_update(ch, sid, *pending);
        fleet_.set_bounds(sid, *pending);
        log("session sid=" + std::to_string(sid) +
            " bounds updated to " + format_bounds(*pending));
        return true;
    } catch (const Error& e) {
        log("session sid=" + std::to_string(sid) +
            " bounds update failed: " + e.what());
        return false;
    }
}

void SatelliteNode::run_session(Channel& ch, const std::string& id, uint64_t sid) {
    const EngineMode mode = opt_.config.mode;
    auto rng = Rng::system();
    GF128 delta0 = GF128::zero();
    if (mode == EngineMode::malicious) delta0 = GF128::random(rng);
    GF128 zk_delta = GF128::random(rng);

    auto dch = TcpChannel::connect(opt_.dealer_host, opt_.dealer_port);
    dch->set_recv_timeout_ms(opt_.recv_timeout_ms);
    dealer_hello(*dch, sid, 0, delta0, zk_delta);
    DealerClient dealer(*dch, sid, 0);

    Bounds bounds = opt_.initial_bounds;
    if (auto it = opt_.bounds_overrides.find(id); it != opt_.bounds_overrides.end())
        bounds = it->second;
    send_bounds_update(ch, sid, bounds);
    fleet_.activate(sid, bounds);
    log("session sid=" + std::to_string(sid) + " id=" + id +
        " active bounds=" + format_bounds(bounds));

    const auto t0 = Clock::now();
    const auto track_iv = std::chrono::milliseconds(opt_.config.tracking_interval_ms);
    const auto proof_iv = std::chrono::milliseconds(opt_.config.proof_interval_ms);
    auto next_track = t0;
    auto next_proof = t0 + proof_iv;
    uint64_t round_no = 0;
    int consecutive_failures = 0;

    while (!stop_) {
        if (!flush_bounds(ch, sid)) {
            if (++consecutive_failures >= 3) break;
        }
        if (auto cur = fleet_.by_id(id); cur && cur->bounds) bounds = *cur->bounds;

        auto due = std::min(next_track, next_proof);
        auto now = Clock::now();
        if (now < due) {
            std::this_thread::sleep_for(
                std::min<Clock::duration>(due - now, std::chrono::milliseconds(50)));
            continue;
        }
        const bool is_track = next_track <= next_proof;
        const auto iv = is_track ? track_iv : proof_iv;
        ++round_no;
        try {
            if (is_track) {
                PoolSource pool;
                provision_tracking(pool, dealer, mode, track_cc_, track_circ_);
                TrackingResult res = satellite_tracking_round(
                    track_cc_, mode, sid, round_no, ch, pool, rng, delta0,
                    opt_.location);
                fleet_.record_u(sid, res.u, res.fault);
                log("tracking round=" + std::to_string(round_no) + " id=" + id +
                    " u=(" + res.u.x.to_decimal() + "," + res.u.y.to_decimal() + "," +
                    res.u.z.to_decimal() + ") fault=" + (res.fault ? "1" : "0"));
            } else {
                ZkPoolSource zpool;
                zpool.add_verifier(dealer.zk_verifier_triples(
                    slacked(range_circ_.stats().and_count)));
                Writer w;
                w.u64(round_no);
                w.u8(kRoundProof);
                ch.send(Frame{msg::TRACK_START, sid, w.take()});
                Verdict v =
                    verify_range(range_circ_, bounds, zk_delta, ch, sid, &zpool, rng);
                int64_t t_ms = ms_since(t0);
                fleet_.record_verdict(sid, v, t_ms);
                log("proof round=" + std::to_string(round_no) + " id=" + id +
                    " verdict=" + verdict_name(v));
                if (v == Verdict::rejected_out_of_bounds) {
                    fleet_.alert(t_ms, id, "out-of-bounds");
                    Writer aw;
                    aw.u64(round_no);
                    aw.str("out-of-bounds");
                    ch.send(Frame{msg::ALERT, sid, aw.take()});
                    log("alert id=" + id + " kind=out-of-bounds");
                } else if (v == Verdict::rejected_cheat) {
                    fleet_.alert(t_ms, id, "cheat");
                    fleet_.set_status(sid, SessionStatus::quarantined);
                    log("quarantine id=" + id + " reason=proof-cheat");
                    try {
                        ch.send_error(sid, errcode::QUARANTINED, "session quarantined");
                    } catch (const Error&) {
                    }
                    return;
                }
            }
            consecutive_failures = 0;
            if (Clock::now() > due + iv) fleet_.record_missed(sid);
            (is_track ? next_track : next_proof) = due + iv;
        } catch (const CheatDetected& e) {
            fleet_.alert(ms_since(t0), id, "cheat");
            fleet_.set_status(sid, SessionStatus::quarantined);
            log("quarantine id=" + id + " reason=" + e.what());
            try {
                ch.send_error(sid, errcode::QUARANTINED, "session quarantined");
            } catch (const Error&) {
            }
            return;
        } catch (const ChannelClosed& e) {
            log("session sid=" + std::to_string(sid) + " link closed: " + e.what());
            fleet_.set_status(sid, SessionStatus::closed);
            return;
        } catch (const Error& e) {
            log("round=" + std::to_string(round_no) + " id=" + id +
                " failed: " + e.what());
            (is_track ? next_track : next_proof) = due + iv;
            if (++consecutive_failures >= 3) {
                log("session sid=" + std::to_string(sid) +
                    " teardown after repeated failures");
                break;
            }
        }
    }
    fleet_.set_status(sid, SessionStatus::closed);
}

std::string SatelliteNode::status_reply(const std::string& request_line) {
    std::string line = trim(request_line);
    std::string cmd = line, arg;
    if (auto sp = line.find(' '); sp != std::string::npos) {
        cmd = line.substr(0, sp);
        arg = trim(line.substr(sp + 1));
    }
    std::ostringstream out;
    if (cmd == "LIST") {
        for (const AircraftInfo& a : fleet_.list()) {
            out << a.id << " sid=" << a.sid
                << " status=" << session_status_name(a.status)
                << " tracking=" << a.tracking_rounds << " proofs=" << a.proof_rounds
                << " missed=" << a.missed_rounds << " verdict="
                << (a.last_verdict ? verdict_name(*a.last_verdict) : "none") << "\n";
        }
    } else if (cmd == "STATUS") {
        auto a = fleet_.by_id(arg);
        if (!a) {
            out << "ERR unknown aircraft\n";
        } else {
            out << a->id << " sid=" << a->sid
                << " status=" << session_status_name(a->status)
                << " tracking=" << a->tracking_rounds << " proofs=" << a->proof_rounds
                << " missed=" << a->missed_rounds
                << " fault=" << (a->antenna_fault ? "1" : "0") << " u=";
            if (a->last_u) {
                out << "(" << a->last_u->x.to_decimal() << ","
                    << a->last_u->y.to_decimal() << "," << a->last_u->z.to_decimal()
                    << ")";
            } else {
                out << "none";
            }
            out << " verdict="
                << (a->last_verdict ? verdict_name(*a->last_verdict) : "none")
                << " verdicts=" << a->verdict_count << " bounds="
                << (a->bounds ? format_bounds(*a->bounds) : "none") << "\n";
        }
    } else if (cmd == "ALERTS") {
        for (const AlertRecord& al : fleet_.alerts())
            out << al.t_ms << " " << al.aircraft << " " << al.kind << "\n";
    } else {
        out << "ERR unknown command\n";
    }
    out << ".\n";
    return out.str();
}

void SatelliteNode::status_loop() {
    while (!stop_) {
        std::unique_ptr<TcpChannel> ch;
        try {
            ch = status_listener_->accept(100);
        } catch (const Error&) {
            if (stop_) break;
            continue;
        }
        if (!ch) continue;
        ch->set_recv_timeout_ms(250);
        const int fd = ch->fd();
        std::string buf;
        bool open = true;
        while (open && !stop_) {
            size_t nl;
            while ((nl = buf.find('\n')) != std::string::npos) {
                std::string reply = status_reply(buf.substr(0, nl));
                buf.erase(0, nl + 1);
                size_t at = 0;
                while (at < reply.size()) {
                    ssize_t n = ::send(fd, reply.data() + at, reply.size() - at, 0);
                    if (n <= 0) {
                        open = false;
                        break;
                    }
                    at += static_cast<size_t>(n);
                }
                if (!open) break;
            }
            if (!open) break;
            char chunk[256];
            ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
            if (n > 0) {
                buf.append(chunk, static_cast<size_t>(n));
            } else if (n == 0) {
                open = false;
            } else if (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
                open = false;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// AircraftNode

AircraftNode::AircraftNode(AircraftOptions opt)
    : opt_(std::move(opt)),
      track_circ_(optimize(build_trajectory(opt_.config.params))),
      track_cc_(CompiledCircuit::compile(track_circ_)),
      range_circ_(optimize(build_range_check(opt_.config.params))) {
    if (opt_.path.empty()) throw ConfigError("flight path is empty");
    std::stable_sort(opt_.path.begin(), opt_.path.end(),
                     [](const PathPoint& a, const PathPoint& b) {
                         return a.t_ms < b.t_ms;
                     });
    for (const PathPoint& pt : opt_.path)
        if (!(pt.pos.params() == opt_.config.params))
            throw ConfigError("flight path parameters differ from the session's");
}

void AircraftNode::log(const std::string& s) {
    (opt_.log ? *opt_.log : own_log_).line(s);
}

Vec3 AircraftNode::location_at(int64_t t_ms) const {
    return path_location_at(opt_.path, t_ms);
}

std::optional<Verdict> AircraftNode::last_verdict() const {
    std::lock_guard<std::mutex> lk(m_);
    return last_verdict_;
}

void AircraftNode::stop() {
    stop_ = true;
}

RunResult AircraftNode::run() {
    std::unique_ptr<Channel> ch;
    std::unique_ptr<TcpChannel> dch;
    uint64_t sid = 0;
    auto rng = Rng::system();
    GF128 delta1 = GF128::zero();
    try {
        auto tcp = TcpChannel::connect(opt_.satellite_host, opt_.satellite_port);
        tcp->set_recv_timeout_ms(opt_.recv_timeout_ms);
        ch = std::move(tcp);
        if (opt_.config.secure_transport)
            ch = std::make_unique<SecureChannel>(std::move(ch), true);
        sid = handshake_connect(*ch, opt_.config, opt_.id);
        log("id=" + opt_.id + " connected sid=" + std::to_string(sid));

        if (opt_.config.mode == EngineMode::malicious) delta1 = GF128::random(rng);
        dch = TcpChannel::connect(opt_.dealer_host, opt_.dealer_port);
        dch->set_recv_timeout_ms(opt_.recv_timeout_ms);
        dealer_hello(*dch, sid, 1, delta1, GF128::zero());
    } catch (const ConfigError& e) {
        log("id=" + opt_.id + " setup rejected: " + e.what());
        return RunResult::setup_config_failed;
    } catch (const Error& e) {
        log("id=" + opt_.id + " setup failed: " + e.what());
        return RunResult::setup_protocol_failed;
    }
    DealerClient dealer(*dch, sid, 1);

    RunResult result = RunResult::stopped;
    {
        std::optional<Bounds> bounds;
        const auto t0 = Clock::now();
        int failures = 0;
        bool running = true;
        while (running && !stop_) {
            Frame f;
            try {
                ch->set_recv_timeout_ms(250);
                f = ch->recv();
            } catch (const ChannelTimeout&) {
                continue;
            } catch (const ChannelClosed&) {
                log("id=" + opt_.id + " link closed");
                result = RunResult::link_closed;
                break;
            }
            ch->set_recv_timeout_ms(opt_.recv_timeout_ms);
            try {
                switch (f.type) {
                    case msg::TRACK_START: {
                        Reader r(f.payload);
                        uint64_t round = r.u64();
                        uint8_t kind = r.u8();
                        r.expect_end();
                        Vec3 loc = location_at(ms_since(t0));
                        if (kind == kRoundTracking) {
                            PoolSource pool;
                            provision_tracking(pool, dealer, opt_.config.mode,
                                               track_cc_, track_circ_);
                            aircraft_tracking_round(track_cc_, opt_.config.mode, sid,
                                                    *ch, pool, rng, delta1, loc);
                            tracking_rounds_.fetch_add(1);
                            log("id=" + opt_.id + " tracking round=" +
                                std::to_string(round) + " done");
                        } else if (kind == kRoundProof) {
                            if (!bounds)
                                throw ProtocolError("proof round before bounds delivery");
                            ZkPoolSource zpool;
                            zpool.add_prover(dealer.zk_prover_triples(
                                slacked(range_circ_.stats().and_count)));
                            Verdict v = prove_range(range_circ_, loc, *bounds, *ch, sid,
                                                    &zpool);
                            proof_rounds_.fetch_add(1);
                            {
                                std::lock_guard<std::mutex> lk(m_);
                                last_verdict_ = v;
                            }
                            log("id=" + opt_.id + " proof round=" +
                                std::to_string(round) + " verdict=" + verdict_name(v));
                        } else {
                            throw ProtocolError("unknown round kind");
                        }
                        failures = 0;
                        break;
                    }
                    case msg::BOUNDS_UPDATE: {
                        try {
                            Bounds nb = decode_bounds_update(f.payload,
                                                             opt_.config.params);
                            bounds = nb;
                            Digest32 dg = blake2b256("bounds", f.payload);
                            Writer w;
                            w.bytes(dg);
                            ch->send(Frame{msg::BOUNDS_ACK, sid, w.take()});
                            log("id=" + opt_.id + " bounds set to " + format_bounds(nb));
                        } catch (const ProtocolError& e) {
                            ch->send_error(sid, errcode::BOUNDS_INVALID, e.what());
                            log("id=" + opt_.id + " rejected bounds: " + e.what());
                        }
                        break;
                    }
                    case msg::ALERT: {
                        Reader r(f.payload);
                        uint64_t round = r.u64();
                        std::string kind = r.str();
                        r.expect_end();
                        log("id=" + opt_.id + " alert round=" + std::to_string(round) +
                            " kind=" + kind);
                        break;
                    }
                    case msg::ERROR: {
                        Reader r(f.payload);
                        uint16_t code = r.u16();
                        std::string reason = r.str();
                        log("id=" + opt_.id + " satellite error code=" +
                            std::to_string(code) + ": " + reason);
                        result = RunResult::torn_down;
                        running = false;
                        break;
                    }
                    default:
                        throw ProtocolError(std::string("unexpected frame: ") +
                                            msg::name(f.type));
                }
            } catch (const ChannelClosed& e) {
                log("id=" + opt_.id + " link closed: " + e.what());
                result = RunResult::link_closed;
                break;
            } catch (const Error& e) {
                log("id=" + opt_.id + " round failed: " + e.what());
                if (++failures >= 3) {
                    log("id=" + opt_.id + " teardown after repeated failures");
                    result = RunResult::torn_down;
                    break;
                }
            }
        }
    }
    log("id=" + opt_.id + " stopped");
    return result;
}

// ---------------------------------------------------------------------------
// DealerNode

DealerNode::DealerNode(DealerNodeOptions opt) : opt_(std::move(opt)) {}

DealerNode::~DealerNode() {
    stop();
}

void DealerNode::log(const std::string& s) {
    (opt_.log ? *opt_.log : own_log_).line(s);
}

void DealerNode::start() {
    listener_ = std::make_unique<TcpListener>(opt_.host, opt_.port);
    log("dealer listening port=" + std::to_string(listener_->port()));
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void DealerNode::stop() {
    if (stop_.exchange(true)) return;
    if (listener_) listener_->close();
    if (accept_thread_.joinable()) accept_thread_.join();
    std::lock_guard<std::mutex> lk(threads_m_);
    for (auto& t : conn_threads_)
        if (t.joinable()) t.join();
    conn_threads_.clear();
}

uint16_t DealerNode::port() const {
    return listener_ ? listener_->port() : 0;
}

std::shared_ptr<DealerState> DealerNode::acquire(uint64_t sid, int party,
                                                 const GF128& delta,
                                                 const GF128& zk_delta) {
    std::lock_guard<std::mutex> lk(m_);
    SessionSlot& slot = sessions_[sid];
    if (!slot.state) slot.state = std::make_shared<DealerState>(Rng::system());
    ++slot.refs;
    if (!delta.is_zero()) slot.state->set_delta(party, delta);
    if (party == 0 && !zk_delta.is_zero()) slot.state->set_zk_delta(zk_delta);
    return slot.state;
}

void DealerNode::release(uint64_t sid) {
    std::lock_guard<std::mutex> lk(m_);
    auto it = sessions_.find(sid);
    if (it == sessions_.end()) return;
    if (--it->second.refs <= 0) sessions_.erase(it);
}

void DealerNode::accept_loop() {
    while (!stop_) {
        std::unique_ptr<TcpChannel> ch;
        try {
            ch = listener_->accept(100);
        } catch (const Error&) {
            if (stop_) break;
            continue;
        }
        if (!ch) continue;
        std::lock_guard<std::mutex> lk(threads_m_);
        conn_threads_.emplace_back(
            [this](std::unique_ptr<TcpChannel> c) { serve(std::move(c)); },
            std::move(ch));
    }
}

void DealerNode::serve(std::unique_ptr<TcpChannel> ch) {
    uint64_t sid = 0;
    bool acquired = false;
    try {
        ch->set_recv_timeout_ms(opt_.recv_timeout_ms);
        Frame hello = ch->expect(msg::HELLO);
        Reader r(hello.payload);
        uint16_t ver = r.u16();
        uint8_t party = r.u8();
        GF128 delta = r.gf();
        GF128 zk_delta = r.gf();
        r.expect_end();
        sid = hello.session_id;
        if (ver != kProtocolVersion) {
            ch->send_error(sid, errcode::CFG_MISMATCH, "protocol version mismatch");
            return;
        }
        if (party > 1) {
            ch->send_error(sid, errcode::CFG_MISMATCH, "party must be 0 or 1");
            return;
        }
        auto state = acquire(sid, party, delta, zk_delta);
        acquired = true;
        ch->send(Frame{msg::CFG_ACK, sid, {}});
        log("dealer session sid=" + std::to_string(sid) + " party=" +
            std::to_string(party) + " registered");

        while (!stop_) {
            Frame f;
            try {
                ch->set_recv_timeout_ms(250);
                f = ch->recv();
            } catch (const ChannelTimeout&) {
                continue;
            }
            ch->set_recv_timeout_ms(opt_.recv_timeout_ms);
            if (f.type != msg::TRIPLE_REQ) {
                ch->send_error(sid, errcode::INTERNAL, "expected a preprocessing request");
                break;
            }
            auto block = serve_dealer_request(*state, f.payload);
            ch->send(Frame{msg::TRIPLE_BLOCK, sid, block});
        }
    } catch (const ChannelClosed&) {
        // normal end of a session's preprocessing stream
    } catch (const Error& e) {
        log("dealer connection error: " + std::string(e.what()));
    }
    if (acquired) release(sid);
}

// ---------------------------------------------------------------------------
// KvConfig

KvConfig KvConfig::parse(std::string_view text) {
    KvConfig out;
    int lineno = 0;
    size_t at = 0;
    while (at <= text.size()) {
        size_t end = text.find('\n', at);
        std::string_view raw = end == std::string_view::npos
                                   ? text.substr(at)
                                   : text.substr(at, end - at);
        ++lineno;
        at = end == std::string_view::npos ? text.size() + 1 : end + 1;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", lineno);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", lineno);
        out.kv_[key] = value;
    }
    return out;
}

KvConfig KvConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool KvConfig::has(const std::string& key) const {
    return kv_.count(key) != 0;
}

std::string KvConfig::str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
}

std::string KvConfig::str_or(const std::string& key, const std::string& def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
}

int64_t KvConfig::num(const std::string& key, int64_t def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    try {
        size_t used = 0;
        int64_t v = std::stoll(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not a number: " + it->second);
    }
}

bool KvConfig::flag(const std::string& key, bool def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("config key " + key + " is not a boolean: " + v);
}

std::pair<std::string, uint16_t> parse_hostport(const std::string& text) {
    size_t colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size())
        throw ConfigError("expected host:port, got: " + text);
    std::string host = text.substr(0, colon);
    int port = 0;
    try {
        size_t used = 0;
        port = std::stoi(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("junk");
    } catch (const std::exception&) {
        throw ConfigError("bad port in: " + text);
    }
    if (port < 1 || port > 65535) throw ConfigError("port out of range in: " + text);
    return {host, static_cast<uint16_t>(port)};
}

Vec3 parse_vec3(const std::string& text, FpParams p) {
    auto parts = split(text, ',');
    if (parts.size() != 3) throw ConfigError("expected x,y,z, got: " + text);
    try {
        return Vec3{FixedPoint::encode_decimal(parts[0], p),
                    FixedPoint::encode_decimal(parts[1], p),
                    FixedPoint::encode_decimal(parts[2], p)};
    } catch (const std::exception& e) {
        throw ConfigError("bad coordinate in '" + text + "': " + e.what());
    }
}

Bounds parse_bounds(const std::string& text, FpParams p) {
    auto parts = split(text, ',');
    if (parts.size() != 6)
        throw ConfigError("expected xmin,xmax,ymin,ymax,zmin,zmax, got: " + text);
    try {
        return Bounds{FixedPoint::encode_decimal(parts[0], p),
                      FixedPoint::encode_decimal(parts[1], p),
                      FixedPoint::encode_decimal(parts[2], p),
                      FixedPoint::encode_decimal(parts[3], p),
                      FixedPoint::encode_decimal(parts[4], p),
                      FixedPoint::encode_decimal(parts[5], p)};
    } catch (const std::exception& e) {
        throw ConfigError("bad bounds '" + text + "': " + e.what());
    }
}

}  // namespace skyveil
