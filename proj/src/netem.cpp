#include "aoibench/netem.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "aoibench/time.hpp"

namespace aoibench::netem {

namespace {

constexpr size_t kStreamChunk = 16 * 1024;  // delay resolution in stream mode
constexpr size_t kDatagramMax = 65536;

[[noreturn]] void throw_errno(const std::string& what) {
    throw std::runtime_error(what + ": " + std::strerror(errno));
}

sockaddr_in make_addr(const std::string& host, uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw std::runtime_error("bad IPv4 address: " + host);
    return addr;
}

// Blocking token bucket. Tokens may run a deficit so oversized units pass;
// long-run departures stay within rate * elapsed + burst.
class TokenBucket {
  public:
    TokenBucket(std::optional<int64_t> rate_bps, int64_t burst_bytes)
        : bytes_per_sec_(rate_bps ? *rate_bps / 8.0 : 0.0),
          burst_(static_cast<double>(burst_bytes)),
          tokens_(static_cast<double>(burst_bytes)),
          last_ns_(now_ns()) {}

    void consume(size_t n, const std::atomic<bool>& stop) {
        if (bytes_per_sec_ <= 0) return;
        std::unique_lock lk(m_);
        bool waited = false;
        for (;;) {
            // Idle credit is capped at the burst, but lateness of our own
            // wait (scheduler overshoot) is repaid in full so the long-run
            // rate converges to the configured value.
            refill(/*cap=*/!waited);
            waited = true;
            // Deficit model: a positive balance admits any unit, which then
            // drives the balance negative until refill pays it back. Average
            // rate converges to bytes_per_sec_ for units larger than burst.
            if (tokens_ > 0) {
                tokens_ -= static_cast<double>(n);
                return;
            }
            if (stop.load()) return;
            int64_t wait_ns = static_cast<int64_t>(-tokens_ / bytes_per_sec_ * 1e9) + 1;
            lk.unlock();
            precise_sleep_until_ns(now_ns() + std::min<int64_t>(wait_ns, 50'000'000));
            lk.lock();
        }
    }

  private:
    void refill(bool cap) {
        int64_t now = now_ns();
        double replenished = tokens_ + (now - last_ns_) / 1e9 * bytes_per_sec_;
        tokens_ = cap ? std::min(burst_, replenished) : replenished;
        last_ns_ = now;
    }

    const double bytes_per_sec_;
    const double burst_;
    double tokens_;
    int64_t last_ns_;
    std::mutex m_;
};

struct Unit {
    std::vector<uint8_t> data;
    int64_t release_ns;
};

// Bounded staging area between the reader and the delayed writer of one
// direction. A full stage blocks the reader, never the writer.
class Stage {
  public:
    explicit Stage(size_t limit_bytes) : limit_(limit_bytes) {}

    bool push(Unit u, const std::atomic<bool>& stop) {
        std::unique_lock lk(m_);
        not_full_.wait(lk, [&] {
            return bytes_ + u.data.size() <= limit_ || units_.empty() || stop.load() ||
                   closed_;
        });
        if (stop.load() || closed_) return false;
        bytes_ += u.data.size();
        units_.push_back(std::move(u));
        not_empty_.notify_one();
        return true;
    }

    std::optional<Unit> pop(const std::atomic<bool>& stop) {
        std::unique_lock lk(m_);
        not_empty_.wait(lk, [&] { return !units_.empty() || closed_ || stop.load(); });
        if (units_.empty()) return std::nullopt;
        Unit u = std::move(units_.front());
        units_.pop_front();
        bytes_ -= u.data.size();
        not_full_.notify_one();
        return u;
    }

    void close() {
        std::lock_guard lk(m_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    void wake() {
        std::lock_guard lk(m_);
        not_empty_.notify_all();
        not_full_.notify_all();
    }

  private:
    const size_t limit_;
    std::mutex m_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::deque<Unit> units_;
    size_t bytes_ = 0;
    bool closed_ = false;
};

class StreamProxy final : public Proxy {
  public:
    explicit StreamProxy(const ImpairmentConfig& cfg) : cfg_(cfg) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw_errno("socket");
        int one = 1;
        setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr = make_addr(cfg.listen_host, cfg.listen_port);
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
            throw_errno("bind");
        if (::listen(listen_fd_, 16) < 0) throw_errno("listen");
        socklen_t len = sizeof addr;
        getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    ~StreamProxy() override { stop(); }

    uint16_t port() const override { return port_; }

    ProxyStats stats() const override {
        std::lock_guard lk(stats_m_);
        return stats_;
    }

    void stop() override {
        bool expected = false;
        if (!stop_.compare_exchange_strong(expected, true)) return;
        ::shutdown(listen_fd_, SHUT_RDWR);
        if (accept_thread_.joinable()) accept_thread_.join();
        {
            std::lock_guard lk(conns_m_);
            for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
        }
        {
            // Readers parked on a full stage and writers parked on an empty
            // one check the stop flag only when notified.
            std::lock_guard lk(stages_m_);
            for (auto& s : stages_) s->wake();
        }
        for (auto& t : workers_)
            if (t.joinable()) t.join();
        ::close(listen_fd_);
        {
            std::lock_guard lk(conns_m_);
            for (int fd : conn_fds_) ::close(fd);
            conn_fds_.clear();
        }
    }

  private:
    void accept_loop() {
        while (!stop_.load()) {
            int cfd = ::accept(listen_fd_, nullptr, nullptr);
            if (cfd < 0) {
                if (stop_.load()) return;
                continue;
            }
            int ufd = ::socket(AF_INET, SOCK_STREAM, 0);
            sockaddr_in up = make_addr(cfg_.upstream_host, cfg_.upstream_port);
            if (::connect(ufd, reinterpret_cast<sockaddr*>(&up), sizeof up) < 0) {
                ::close(ufd);
                ::close(cfd);  // upstream unreachable: drop the client
                continue;
            }
            int one = 1;
            setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            setsockopt(ufd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            // When the stage is configured tighter than the kernel's default
            // socket buffering, shrink the client-side receive buffer to
            // match so backpressure reaches the sender promptly. With the
            // default stage the kernel buffer is left alone: a tiny receive
            // window stalls on the TCP persist timer and caps throughput far
            // below the configured rate.
            if (cfg_.stage_limit_bytes < 16384) {
                int rcvbuf = static_cast<int>(std::max<size_t>(cfg_.stage_limit_bytes, 4096));
                setsockopt(cfd, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof rcvbuf);
            }
            {
                std::lock_guard lk(conns_m_);
                conn_fds_.push_back(cfd);
                conn_fds_.push_back(ufd);
            }
            spawn_direction(cfd, ufd, true);
            spawn_direction(ufd, cfd, false);
        }
    }

    void spawn_direction(int src, int dst, bool upstream_dir) {
        auto stage = std::make_shared<Stage>(cfg_.stage_limit_bytes);
        {
            std::lock_guard lk(stages_m_);
            stages_.push_back(stage);
        }
        auto bucket = std::make_shared<TokenBucket>(cfg_.rate_limit_bps, cfg_.burst_bytes);
        int64_t delay_ns = cfg_.one_way_delay_ms * 1'000'000;

        std::lock_guard lk(workers_m_);
        workers_.emplace_back([this, src, stage] {
            std::vector<uint8_t> buf(kStreamChunk);
            while (!stop_.load()) {
                ssize_t n = ::recv(src, buf.data(), buf.size(), 0);
                if (n <= 0) break;
                Unit u{std::vector<uint8_t>(buf.begin(), buf.begin() + n),
                       now_ns()};  // release_ns set by the writer
                if (!stage->push(std::move(u), stop_)) break;
            }
            stage->close();
        });
        workers_.emplace_back([this, dst, stage, bucket, delay_ns, upstream_dir] {
            while (true) {
                auto u = stage->pop(stop_);
                if (!u || stop_.load()) break;
                bucket->consume(u->data.size(), stop_);
                int64_t release = u->release_ns + delay_ns;
                if (release > now_ns()) precise_sleep_until_ns(release);
                if (stop_.load()) break;
                size_t off = 0;
                bool ok = true;
                while (off < u->data.size()) {
                    ssize_t n = ::send(dst, u->data.data() + off, u->data.size() - off,
                                       MSG_NOSIGNAL);
                    if (n <= 0) {
                        ok = false;
                        break;
                    }
                    off += static_cast<size_t>(n);
                }
                if (!ok) break;
                std::lock_guard slk(stats_m_);
                if (upstream_dir)
                    stats_.relayed_bytes_up += u->data.size();
                else
                    stats_.relayed_bytes_down += u->data.size();
            }
            stage->close();  // a writer that quits must not strand its reader
            ::shutdown(dst, SHUT_WR);
        });
    }

    ImpairmentConfig cfg_;
    int listen_fd_ = -1;
    uint16_t port_ = 0;
    std::atomic<bool> stop_{false};
    std::thread accept_thread_;
    std::mutex workers_m_;
    std::vector<std::thread> workers_;
    std::mutex stages_m_;
    std::vector<std::shared_ptr<Stage>> stages_;
    std::mutex conns_m_;
    std::vector<int> conn_fds_;
    mutable std::mutex stats_m_;
    ProxyStats stats_;
};

// Relays UDP datagrams preserving boundaries; one upstream-facing socket per
// client address, evicted after an idle timeout.
class DatagramProxy final : public Proxy {
  public:
    explicit DatagramProxy(const ImpairmentConfig& cfg) : cfg_(cfg) {
        fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (fd_ < 0) throw_errno("socket");
        sockaddr_in addr = make_addr(cfg.listen_host, cfg.listen_port);
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
            throw_errno("bind");
        socklen_t len = sizeof addr;
        getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        up_addr_ = make_addr(cfg.upstream_host, cfg.upstream_port);
        main_thread_ = std::thread([this] { client_loop(); });
        evict_thread_ = std::thread([this] { evict_loop(); });
    }

    ~DatagramProxy() override { stop(); }

    uint16_t port() const override { return port_; }

    ProxyStats stats() const override {
        std::lock_guard lk(stats_m_);
        return stats_;
    }

    void stop() override {
        bool expected = false;
        if (!stop_.compare_exchange_strong(expected, true)) return;
        ::shutdown(fd_, SHUT_RDWR);
        {
            std::lock_guard lk(peers_m_);
            for (auto& [key, peer] : peers_) {
                ::shutdown(peer->fd, SHUT_RDWR);
                peer->up_stage.wake();
                peer->down_stage.wake();
            }
        }
        if (main_thread_.joinable()) main_thread_.join();
        if (evict_thread_.joinable()) evict_thread_.join();
        {
            std::lock_guard lk(peers_m_);
            for (auto& [key, peer] : peers_) peer->join_and_close();
            peers_.clear();
        }
        ::close(fd_);
    }

  private:
    struct Peer {
        explicit Peer(const ImpairmentConfig& cfg)
            : up_stage(1 << 22),
              down_stage(1 << 22),
              up_bucket(cfg.rate_limit_bps, cfg.burst_bytes),
              down_bucket(cfg.rate_limit_bps, cfg.burst_bytes) {}

        int fd = -1;
        sockaddr_in client_addr{};
        Stage up_stage;
        Stage down_stage;
        TokenBucket up_bucket;
        TokenBucket down_bucket;
        std::atomic<int64_t> last_seen_ns{0};
        std::atomic<bool> evicted{false};
        std::vector<std::thread> threads;

        void join_and_close() {
            up_stage.close();
            down_stage.close();
            for (auto& t : threads)
                if (t.joinable()) t.join();
            if (fd >= 0) ::close(fd);
        }
    };

    void client_loop() {
        std::vector<uint8_t> buf(kDatagramMax);
        while (!stop_.load()) {
            sockaddr_in from{};
            socklen_t flen = sizeof from;
            ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                                   reinterpret_cast<sockaddr*>(&from), &flen);
            if (n < 0) {
                if (stop_.load()) return;
                continue;
            }
            auto* peer = peer_for(from);
            if (!peer) continue;
            peer->last_seen_ns.store(now_ns());
            note_datagram(static_cast<size_t>(n), true);
            peer->up_stage.push(Unit{{buf.begin(), buf.begin() + n}, now_ns()}, stop_);
        }
    }

    Peer* peer_for(const sockaddr_in& from) {
        uint64_t key = (static_cast<uint64_t>(from.sin_addr.s_addr) << 16) | from.sin_port;
        std::lock_guard lk(peers_m_);
        auto it = peers_.find(key);
        if (it != peers_.end()) return it->second.get();

        auto peer = std::make_unique<Peer>(cfg_);
        peer->client_addr = from;
        peer->fd = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (peer->fd < 0) return nullptr;
        if (::connect(peer->fd, reinterpret_cast<const sockaddr*>(&up_addr_),
                      sizeof up_addr_) < 0) {
            ::close(peer->fd);
            return nullptr;
        }
        Peer* p = peer.get();
        int64_t delay_ns = cfg_.one_way_delay_ms * 1'000'000;

        // upstream writer
        p->threads.emplace_back([this, p, delay_ns] {
            while (!stop_.load() && !p->evicted) {
                auto u = p->up_stage.pop(stop_);
                if (!u) break;
                p->up_bucket.consume(u->data.size(), stop_);
                int64_t release = u->release_ns + delay_ns;
                if (release > now_ns()) precise_sleep_until_ns(release);
                ::send(p->fd, u->data.data(), u->data.size(), 0);
                std::lock_guard slk(stats_m_);
                stats_.relayed_bytes_up += u->data.size();
            }
        });
        // upstream reader
        p->threads.emplace_back([this, p] {
            std::vector<uint8_t> rbuf(kDatagramMax);
            while (!stop_.load() && !p->evicted) {
                ssize_t n = ::recv(p->fd, rbuf.data(), rbuf.size(), 0);
                if (n < 0) break;
                p->last_seen_ns.store(now_ns());
                note_datagram(static_cast<size_t>(n), false);
                p->down_stage.push(Unit{{rbuf.begin(), rbuf.begin() + n}, now_ns()}, stop_);
            }
            p->down_stage.close();
        });
        // downstream writer (back to the client through the listen socket)
        p->threads.emplace_back([this, p, delay_ns] {
            while (!stop_.load() && !p->evicted) {
                auto u = p->down_stage.pop(stop_);
                if (!u) break;
                p->down_bucket.consume(u->data.size(), stop_);
                int64_t release = u->release_ns + delay_ns;
                if (release > now_ns()) precise_sleep_until_ns(release);
                ::sendto(fd_, u->data.data(), u->data.size(), 0,
                         reinterpret_cast<const sockaddr*>(&p->client_addr),
                         sizeof p->client_addr);
                std::lock_guard slk(stats_m_);
                stats_.relayed_bytes_down += u->data.size();
            }
        });

        peer->last_seen_ns.store(now_ns());
        auto [pos, inserted] = peers_.emplace(key, std::move(peer));
        return pos->second.get();
    }

    void evict_loop() {
        while (!stop_.load()) {
            sleep_ns(1'000'000'000);
            int64_t cutoff = now_ns() - cfg_.idle_eviction_ms * 1'000'000;
            std::lock_guard lk(peers_m_);
            for (auto it = peers_.begin(); it != peers_.end();) {
                if (it->second->last_seen_ns.load() < cutoff) {
                    it->second->evicted = true;
                    ::shutdown(it->second->fd, SHUT_RDWR);
                    it->second->join_and_close();
                    it = peers_.erase(it);
                } else {
                    ++it;
                }
            }
        }
    }

    void note_datagram(size_t n, bool up) {
        std::lock_guard lk(stats_m_);
        if (up)
            ++stats_.datagrams_up;
        else
            ++stats_.datagrams_down;
        stats_.max_datagram_bytes = std::max(stats_.max_datagram_bytes, n);
    }

    ImpairmentConfig cfg_;
    int fd_ = -1;
    uint16_t port_ = 0;
    sockaddr_in up_addr_{};
    std::atomic<bool> stop_{false};
    std::thread main_thread_;
    std::thread evict_thread_;
    std::mutex peers_m_;
    std::map<uint64_t, std::unique_ptr<Peer>> peers_;
    mutable std::mutex stats_m_;
    ProxyStats stats_;
};

}  // namespace

std::unique_ptr<Proxy> run_proxy(const ImpairmentConfig& cfg) {
    if (cfg.mode == ProxyMode::Stream) return std::make_unique<StreamProxy>(cfg);
    return std::make_unique<DatagramProxy>(cfg);
}

}  // namespace aoibench::netem
