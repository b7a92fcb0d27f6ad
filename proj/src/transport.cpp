#include "aoibench/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/err.h>
#include <openssl/ssl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <thread>
#include <vector>

#include "aoibench/quic_shim.h"
#include "aoibench/time.hpp"

namespace aoibench::net {

std::string to_string(TransportKind k) {
    switch (k) {
        case TransportKind::PlainStream: return "tcp";
        case TransportKind::SecureStream: return "tls";
        case TransportKind::Quic: return "quic";
    }
    return "?";
}

TransportKind transport_kind_from_string(const std::string& s) {
    if (s == "tcp" || s == "plain") return TransportKind::PlainStream;
    if (s == "tls") return TransportKind::SecureStream;
    if (s == "quic") return TransportKind::Quic;
    throw TransportError("unknown transport kind: " + s);
}

void TransportConfig::validate() const {
    if (kind == TransportKind::Quic && nagle_enabled.has_value())
        throw TransportError("nagle_enabled applies to stream transports only");
    if (kind != TransportKind::Quic && segmentation_offload.has_value())
        throw TransportError("segmentation_offload applies to quic only");
    if (trust == TlsTrust::TrustGivenRoot && ca_pem.empty())
        throw TransportError("trust-given-root needs a ca certificate");
}

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw TransportError(what + ": " + std::strerror(errno));
}

std::string addr_to_string(const sockaddr_storage& ss) {
    char buf[INET6_ADDRSTRLEN] = {};
    uint16_t port = 0;
    if (ss.ss_family == AF_INET) {
        const auto* a = reinterpret_cast<const sockaddr_in*>(&ss);
        inet_ntop(AF_INET, &a->sin_addr, buf, sizeof buf);
        port = ntohs(a->sin_port);
    } else if (ss.ss_family == AF_INET6) {
        const auto* a = reinterpret_cast<const sockaddr_in6*>(&ss);
        inet_ntop(AF_INET6, &a->sin6_addr, buf, sizeof buf);
        port = ntohs(a->sin6_port);
    }
    return std::string(buf) + ":" + std::to_string(port);
}

std::string fd_local_addr(int fd) {
    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    getsockname(fd, reinterpret_cast<sockaddr*>(&ss), &len);
    return addr_to_string(ss);
}

std::string fd_remote_addr(int fd) {
    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    getpeername(fd, reinterpret_cast<sockaddr*>(&ss), &len);
    return addr_to_string(ss);
}

sockaddr_in make_addr(const std::string& host, uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw TransportError("bad IPv4 address: " + host);
    return addr;
}

void apply_socket_options(int fd, const TransportConfig& cfg) {
    int one = 1;
    // Kernel-level Nagle stays off; the coalescer below implements the
    // algorithm when requested, where it can observe the impaired RTT.
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    if (cfg.so_sndbuf > 0)
        setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &cfg.so_sndbuf, sizeof cfg.so_sndbuf);
}

int tcp_connect(const TransportConfig& cfg) {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK, 0);
    if (fd < 0) throw_errno("socket");
    sockaddr_in addr = make_addr(cfg.host, cfg.port);
    int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    if (rc < 0 && errno != EINPROGRESS) {
        int e = errno;
        ::close(fd);
        throw TransportError("connect: " + std::string(std::strerror(e)));
    }
    if (rc < 0) {
        pollfd pfd{fd, POLLOUT, 0};
        rc = ::poll(&pfd, 1, cfg.connect_timeout_ms);
        if (rc <= 0) {
            ::close(fd);
            throw TransportError(rc == 0 ? "connect timeout" : "connect poll failed");
        }
        int err = 0;
        socklen_t len = sizeof err;
        getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            ::close(fd);
            throw TransportError("connect: " + std::string(std::strerror(err)));
        }
    }
    apply_socket_options(fd, cfg);
    return fd;
}

// Stream connection with a user-level implementation of Nagle's algorithm.
//
// A small write goes out immediately when nothing is outstanding; while a
// response is pending it coalesces with later writes until either the
// segment threshold fills or inbound bytes arrive. The impairment proxy
// terminates TCP, so the kernel's Nagle never sees the injected RTT; doing
// the coalescing here restores the paper-relevant dynamics and makes the
// write counters meaningful.
class StreamConnection : public Connection {
  public:
    explicit StreamConnection(const TransportConfig& cfg)
        : nagle_(cfg.effective_nagle()), seg_bytes_(cfg.coalesce_segment_bytes) {}

    ~StreamConnection() override { stop_flusher(); }

    void send(std::span<const uint8_t> data) override {
        if (closed_.load()) throw ConnectionClosed();
        if (!nagle_) {
            write_segment(data);
            return;
        }
        Drain mode;
        {
            std::lock_guard lk(nagle_m_);
            pending_.insert(pending_.end(), data.begin(), data.end());
            if (!in_flight_) {
                mode = Drain::All;
            } else if (pending_.size() >= seg_bytes_) {
                // Condition 2: full segments go out even with data outstanding.
                mode = Drain::FullSegments;
            } else {
                if (deadline_ns_ == 0) {
                    deadline_ns_ = now_ns() + flush_cap_ns();
                    flusher_cv_.notify_one();
                }
                return;
            }
        }
        pump(mode);
    }

    size_t recv(std::span<uint8_t> buf) override {
        if (closed_.load()) throw ConnectionClosed();
        size_t n = raw_read(buf);
        if (n > 0) on_inbound();
        return n;
    }

    void close() override {
        std::lock_guard clk(close_m_);
        if (close_done_) return;
        close_done_ = true;
        if (nagle_) {
            try {
                pump(Drain::All);
            } catch (...) {
                // peer already gone; nothing left to flush
            }
        }
        closed_.store(true);
        stop_flusher();
        shutdown_stream();
    }

  protected:
    // One blocking write of a contiguous chunk; the unit the write counter
    // counts. Subclasses push bytes to the wire here.
    virtual void raw_write_all(std::span<const uint8_t> data) = 0;
    virtual size_t raw_read(std::span<uint8_t> buf) = 0;
    virtual void shutdown_stream() = 0;

    void start_flusher() {
        if (nagle_) flusher_ = std::thread([this] { flusher_loop(); });
    }

    std::atomic<bool> closed_{false};

  private:
    enum class Drain { All, FullSegments };

    void wire_write(std::span<const uint8_t> data) {
        raw_write_all(data);
        writes_.fetch_add(1, std::memory_order_relaxed);
        bytes_.fetch_add(data.size(), std::memory_order_relaxed);
        int64_t t = now_ns();
        int64_t expected = 0;
        awaiting_since_ns_.compare_exchange_strong(expected, t);
    }

    void write_segment(std::span<const uint8_t> data) {
        std::lock_guard lk(write_m_);
        wire_write(data);
    }

    // Drains pending bytes to the wire in segment-sized chunks. The next
    // chunk is detached only while write_m_ is held, so chunks written by
    // concurrent callers can never pass each other on the wire; nagle_m_ is
    // released during the blocking write so send-side bookkeeping (and the
    // receive path's in_flight_ reset) is never stalled behind backpressure.
    void pump(Drain mode) {
        for (;;) {
            std::lock_guard wlk(write_m_);
            std::vector<uint8_t> chunk;
            {
                std::lock_guard lk(nagle_m_);
                size_t n = 0;
                if (mode == Drain::All)
                    n = std::min(pending_.size(), seg_bytes_);
                else if (pending_.size() >= seg_bytes_)
                    n = seg_bytes_;
                if (n == 0) {
                    if (mode == Drain::All)
                        deadline_ns_ = 0;
                    else if (!pending_.empty() && deadline_ns_ == 0) {
                        deadline_ns_ = now_ns() + flush_cap_ns();
                        flusher_cv_.notify_one();
                    }
                    return;
                }
                chunk.assign(pending_.begin(), pending_.begin() + n);
                pending_.erase(pending_.begin(), pending_.begin() + n);
                in_flight_ = true;
            }
            wire_write(chunk);
        }
    }

    void on_inbound() {
        int64_t since = awaiting_since_ns_.exchange(0);
        if (since != 0) {
            int64_t sample = now_ns() - since;
            int64_t prev = rtt_estimate_ns_.load();
            rtt_estimate_ns_.store(prev == 0 ? sample : (3 * prev + sample) / 4);
        }
        if (!nagle_) return;
        // The reader thread never writes: a blocked flush on this thread
        // would stop ack draining and could deadlock against a backpressured
        // peer. Hand any pending bytes to the flusher instead.
        std::lock_guard lk(nagle_m_);
        in_flight_ = false;
        if (!pending_.empty()) {
            deadline_ns_ = now_ns();
            flusher_cv_.notify_one();
        }
    }

    int64_t flush_cap_ns() const {
        // Stand-in for "an ack arrives within ~RTT": without inbound traffic,
        // pending bytes still leave after about two estimated round trips.
        int64_t rtt = rtt_estimate_ns_.load();
        if (rtt == 0) return 200'000'000;
        return std::clamp<int64_t>(2 * rtt, 1'000'000, 500'000'000);
    }

    void flusher_loop() {
        std::unique_lock lk(nagle_m_);
        while (!flusher_stop_) {
            if (deadline_ns_ == 0) {
                flusher_cv_.wait(lk, [&] { return flusher_stop_ || deadline_ns_ != 0; });
                continue;
            }
            int64_t dl = deadline_ns_;
            auto tp = std::chrono::steady_clock::time_point(std::chrono::nanoseconds(dl));
            flusher_cv_.wait_until(lk, tp, [&] { return flusher_stop_ || deadline_ns_ != dl; });
            if (flusher_stop_) break;
            if (deadline_ns_ == dl && now_ns() >= dl && !pending_.empty()) {
                lk.unlock();
                pump(Drain::All);
                lk.lock();
            }
            if (pending_.empty()) deadline_ns_ = 0;
        }
    }

    void stop_flusher() {
        {
            std::lock_guard lk(nagle_m_);
            flusher_stop_ = true;
            flusher_cv_.notify_all();
        }
        if (flusher_.joinable()) flusher_.join();
    }

    const bool nagle_;
    const size_t seg_bytes_;

    std::mutex close_m_;
    bool close_done_ = false;
    std::mutex write_m_;
    std::mutex nagle_m_;
    std::condition_variable flusher_cv_;
    std::vector<uint8_t> pending_;
    bool in_flight_ = false;
    int64_t deadline_ns_ = 0;
    bool flusher_stop_ = false;
    std::thread flusher_;

    std::atomic<int64_t> awaiting_since_ns_{0};
    std::atomic<int64_t> rtt_estimate_ns_{0};
};

class PlainConnection final : public StreamConnection {
  public:
    PlainConnection(int fd, const TransportConfig& cfg) : StreamConnection(cfg), fd_(fd) {
        start_flusher();
    }

    ~PlainConnection() override {
        close();
        ::close(fd_);
    }

    TransportKind kind() const override { return TransportKind::PlainStream; }
    std::string local_address() const override { return fd_local_addr(fd_); }
    std::string remote_address() const override { return fd_remote_addr(fd_); }

  protected:
    void raw_write_all(std::span<const uint8_t> data) override {
        size_t off = 0;
        while (off < data.size()) {
            ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
            if (n > 0) {
                off += static_cast<size_t>(n);
                continue;
            }
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
                if (closed_.load()) throw ConnectionClosed();
                pollfd pfd{fd_, POLLOUT, 0};
                ::poll(&pfd, 1, 100);
                continue;
            }
            if (n < 0 && errno == EINTR) continue;
            if (closed_.load()) throw ConnectionClosed();
            throw_errno("send");
        }
    }

    size_t raw_read(std::span<uint8_t> buf) override {
        for (;;) {
            ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
            if (n > 0) return static_cast<size_t>(n);
            if (n == 0) return 0;
            if (errno == EAGAIN || errno == EWOULDBLOCK) {
                if (closed_.load()) throw ConnectionClosed();
                pollfd pfd{fd_, POLLIN, 0};
                ::poll(&pfd, 1, 100);
                continue;
            }
            if (errno == EINTR) continue;
            if (closed_.load()) throw ConnectionClosed();
            throw_errno("recv");
        }
    }

    void shutdown_stream() override { ::shutdown(fd_, SHUT_RDWR); }

  private:
    int fd_;
};

// --- TLS ---

struct SslCtxDeleter {
    void operator()(SSL_CTX* ctx) const { SSL_CTX_free(ctx); }
};
struct SslDeleter {
    void operator()(SSL* ssl) const { SSL_free(ssl); }
};
using SslCtxPtr = std::unique_ptr<SSL_CTX, SslCtxDeleter>;
using SslPtr = std::unique_ptr<SSL, SslDeleter>;

std::string openssl_error() {
    char buf[256];
    ERR_error_string_n(ERR_get_error(), buf, sizeof buf);
    return buf;
}

void load_pem_into_store(SSL_CTX* ctx, const std::string& pem) {
    BIO* bio = BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size()));
    X509_STORE* store = SSL_CTX_get_cert_store(ctx);
    for (;;) {
        X509* cert = PEM_read_bio_X509(bio, nullptr, nullptr, nullptr);
        if (!cert) break;
        X509_STORE_add_cert(store, cert);
        X509_free(cert);
    }
    BIO_free(bio);
    ERR_clear_error();
}

SslCtxPtr make_client_ctx(const TransportConfig& cfg) {
    SslCtxPtr ctx(SSL_CTX_new(TLS_client_method()));
    if (!ctx) throw TransportError("SSL_CTX_new: " + openssl_error());
    SSL_CTX_set_min_proto_version(ctx.get(), TLS1_3_VERSION);
    SSL_CTX_set_max_proto_version(ctx.get(), TLS1_3_VERSION);
    switch (cfg.trust) {
        case TlsTrust::Verify:
            SSL_CTX_set_default_verify_paths(ctx.get());
            SSL_CTX_set_verify(ctx.get(), SSL_VERIFY_PEER, nullptr);
            break;
        case TlsTrust::TrustGivenRoot:
            load_pem_into_store(ctx.get(), cfg.ca_pem);
            SSL_CTX_set_verify(ctx.get(), SSL_VERIFY_PEER, nullptr);
            break;
        case TlsTrust::InsecureSkip:
            SSL_CTX_set_verify(ctx.get(), SSL_VERIFY_NONE, nullptr);
            break;
    }
    return ctx;
}

class TlsConnection final : public StreamConnection {
  public:
    // Takes ownership of fd and ssl; the handshake has already completed.
    TlsConnection(int fd, SslPtr ssl, SslCtxPtr ctx, const TransportConfig& cfg)
        : StreamConnection(cfg), fd_(fd), ssl_(std::move(ssl)), ctx_(std::move(ctx)) {
        start_flusher();
    }

    ~TlsConnection() override {
        close();
        ::close(fd_);
    }

    TransportKind kind() const override { return TransportKind::SecureStream; }
    std::string local_address() const override { return fd_local_addr(fd_); }
    std::string remote_address() const override { return fd_remote_addr(fd_); }

  protected:
    void raw_write_all(std::span<const uint8_t> data) override {
        size_t off = 0;
        while (off < data.size()) {
            int n;
            int err;
            {
                std::lock_guard lk(ssl_m_);
                n = SSL_write(ssl_.get(), data.data() + off,
                              static_cast<int>(data.size() - off));
                err = n <= 0 ? SSL_get_error(ssl_.get(), n) : SSL_ERROR_NONE;
            }
            if (n > 0) {
                off += static_cast<size_t>(n);
                continue;
            }
            wait_or_fail(err, "SSL_write");
        }
    }

    size_t raw_read(std::span<uint8_t> buf) override {
        for (;;) {
            int n;
            int err;
            {
                std::lock_guard lk(ssl_m_);
                n = SSL_read(ssl_.get(), buf.data(), static_cast<int>(buf.size()));
                err = n <= 0 ? SSL_get_error(ssl_.get(), n) : SSL_ERROR_NONE;
            }
            if (n > 0) return static_cast<size_t>(n);
            if (err == SSL_ERROR_ZERO_RETURN) return 0;
            if (err == SSL_ERROR_SYSCALL && errno == 0) return 0;  // abrupt EOF
            wait_or_fail(err, "SSL_read");
        }
    }

    void shutdown_stream() override {
        {
            std::lock_guard lk(ssl_m_);
            SSL_shutdown(ssl_.get());  // best-effort close_notify
        }
        ::shutdown(fd_, SHUT_RDWR);
    }

  private:
    void wait_or_fail(int err, const char* what) {
        if (closed_.load()) throw ConnectionClosed();
        if (err == SSL_ERROR_WANT_READ || err == SSL_ERROR_WANT_WRITE) {
            pollfd pfd{fd_, static_cast<short>(err == SSL_ERROR_WANT_READ ? POLLIN : POLLOUT),
                       0};
            ::poll(&pfd, 1, 100);
            return;
        }
        throw TransportError(std::string(what) + " failed: " + openssl_error());
    }

    int fd_;
    std::mutex ssl_m_;  // SSL object is not safe for concurrent use
    SslPtr ssl_;
    SslCtxPtr ctx_;
};

// Drives a non-blocking SSL handshake with a deadline.
void run_handshake(SSL* ssl, int fd, int timeout_ms, bool accept) {
    int64_t deadline = now_ns() + static_cast<int64_t>(timeout_ms) * 1'000'000;
    for (;;) {
        int rc = accept ? SSL_accept(ssl) : SSL_connect(ssl);
        if (rc == 1) return;
        int err = SSL_get_error(ssl, rc);
        if (err != SSL_ERROR_WANT_READ && err != SSL_ERROR_WANT_WRITE)
            throw TransportError("TLS handshake failed: " + openssl_error());
        int64_t left_ms = (deadline - now_ns()) / 1'000'000;
        if (left_ms <= 0) throw TransportError("TLS handshake timeout");
        pollfd pfd{fd, static_cast<short>(err == SSL_ERROR_WANT_READ ? POLLIN : POLLOUT), 0};
        ::poll(&pfd, 1, static_cast<int>(std::min<int64_t>(left_ms, 100)));
    }
}

std::unique_ptr<Connection> tls_connect(const TransportConfig& cfg) {
    int fd = tcp_connect(cfg);
    auto ctx = make_client_ctx(cfg);
    SslPtr ssl(SSL_new(ctx.get()));
    if (!ssl) {
        ::close(fd);
        throw TransportError("SSL_new failed");
    }
    SSL_set_fd(ssl.get(), fd);
    SSL_set_tlsext_host_name(ssl.get(), cfg.server_name.c_str());
    if (cfg.trust != TlsTrust::InsecureSkip)
        SSL_set1_host(ssl.get(), cfg.server_name.c_str());
    SSL_set_mode(ssl.get(),
                 SSL_MODE_ENABLE_PARTIAL_WRITE | SSL_MODE_ACCEPT_MOVING_WRITE_BUFFER);
    try {
        run_handshake(ssl.get(), fd, cfg.connect_timeout_ms, false);
    } catch (...) {
        ::close(fd);
        throw;
    }
    return std::make_unique<TlsConnection>(fd, std::move(ssl), std::move(ctx), cfg);
}

// --- QUIC ---

class QuicConnection final : public Connection {
  public:
    explicit QuicConnection(qs_conn* conn) : conn_(conn) {}

    ~QuicConnection() override {
        close();
        qs_conn_free(conn_);
    }

    void send(std::span<const uint8_t> data) override {
        if (closed_.load()) throw ConnectionClosed();
        if (qs_send(conn_, data.data(), data.size()) != 0) {
            if (closed_.load()) throw ConnectionClosed();
            throw TransportError("quic send failed");
        }
        writes_.fetch_add(1, std::memory_order_relaxed);
        bytes_.fetch_add(data.size(), std::memory_order_relaxed);
    }

    size_t recv(std::span<uint8_t> buf) override {
        int64_t n = qs_recv(conn_, buf.data(), buf.size());
        if (n > 0) return static_cast<size_t>(n);
        if (closed_.load()) throw ConnectionClosed();
        if (n == 0) return 0;
        throw TransportError("quic recv failed");
    }

    void close() override {
        bool expected = false;
        if (!closed_.compare_exchange_strong(expected, true)) return;
        qs_conn_close(conn_);
    }

    TransportKind kind() const override { return TransportKind::Quic; }

    std::string local_address() const override {
        char buf[64] = {};
        qs_local_addr(conn_, buf, sizeof buf);
        return buf;
    }

    std::string remote_address() const override {
        char buf[64] = {};
        qs_remote_addr(conn_, buf, sizeof buf);
        return buf;
    }

  private:
    qs_conn* conn_;
    std::atomic<bool> closed_{false};
};

std::unique_ptr<Connection> quic_connect(const TransportConfig& cfg) {
    char err[256] = {};
    int trust_mode = cfg.trust == TlsTrust::InsecureSkip ? QS_TRUST_INSECURE : QS_TRUST_CA_PEM;
    if (cfg.trust == TlsTrust::Verify)
        throw TransportError("quic lab transport supports trust-given-root or insecure-skip");
    qs_conn* conn = qs_connect(cfg.host.c_str(), cfg.port, cfg.server_name.c_str(),
                               trust_mode, cfg.ca_pem.empty() ? nullptr : cfg.ca_pem.c_str(),
                               cfg.effective_gso() ? 1 : 0,
                               static_cast<uint32_t>(cfg.connect_timeout_ms), err, sizeof err);
    if (!conn) throw TransportError(std::string("quic connect failed: ") + err);
    return std::make_unique<QuicConnection>(conn);
}

// --- Listeners ---

int tcp_listen_fd(const std::string& host, uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = make_addr(host, port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        ::close(fd);
        throw_errno("bind");
    }
    if (::listen(fd, 64) < 0) {
        ::close(fd);
        throw_errno("listen");
    }
    return fd;
}

uint16_t fd_port(int fd) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    return ntohs(addr.sin_port);
}

class StreamListener final : public Listener {
  public:
    explicit StreamListener(const ListenConfig& cfg) : cfg_(cfg) {
        fd_ = tcp_listen_fd(cfg.host, cfg.port);
        port_ = fd_port(fd_);
        if (cfg.kind == TransportKind::SecureStream) {
            ctx_.reset(SSL_CTX_new(TLS_server_method()));
            if (!ctx_) throw TransportError("SSL_CTX_new: " + openssl_error());
            SSL_CTX_set_min_proto_version(ctx_.get(), TLS1_3_VERSION);
            SSL_CTX_set_max_proto_version(ctx_.get(), TLS1_3_VERSION);
            BIO* cbio = BIO_new_mem_buf(cfg.cert_pem.data(), static_cast<int>(cfg.cert_pem.size()));
            X509* cert = PEM_read_bio_X509(cbio, nullptr, nullptr, nullptr);
            if (!cert || SSL_CTX_use_certificate(ctx_.get(), cert) != 1)
                throw TransportError("bad server certificate");
            // Remaining PEM blocks form the chain.
            for (;;) {
                X509* extra = PEM_read_bio_X509(cbio, nullptr, nullptr, nullptr);
                if (!extra) break;
                SSL_CTX_add_extra_chain_cert(ctx_.get(), extra);
            }
            ERR_clear_error();
            X509_free(cert);
            BIO_free(cbio);
            BIO* kbio = BIO_new_mem_buf(cfg.key_pem.data(), static_cast<int>(cfg.key_pem.size()));
            EVP_PKEY* key = PEM_read_bio_PrivateKey(kbio, nullptr, nullptr, nullptr);
            BIO_free(kbio);
            if (!key || SSL_CTX_use_PrivateKey(ctx_.get(), key) != 1)
                throw TransportError("bad server key");
            EVP_PKEY_free(key);
        }
    }

    ~StreamListener() override {
        close();
        ::close(fd_);
    }

    std::unique_ptr<Connection> accept() override {
        for (;;) {
            if (closed_.load()) return nullptr;
            pollfd pfd{fd_, POLLIN, 0};
            int rc = ::poll(&pfd, 1, 200);
            if (rc <= 0) continue;
            int cfd = ::accept4(fd_, nullptr, nullptr, SOCK_NONBLOCK);
            if (cfd < 0) {
                if (closed_.load()) return nullptr;
                continue;
            }
            TransportConfig conn_cfg;
            conn_cfg.kind = cfg_.kind;
            conn_cfg.nagle_enabled = false;  // server side never delays
            apply_socket_options(cfd, conn_cfg);
            if (cfg_.kind == TransportKind::PlainStream)
                return std::make_unique<PlainConnection>(cfd, conn_cfg);
            SslPtr ssl(SSL_new(ctx_.get()));
            SSL_set_fd(ssl.get(), cfd);
            SSL_set_mode(ssl.get(), SSL_MODE_ENABLE_PARTIAL_WRITE |
                                        SSL_MODE_ACCEPT_MOVING_WRITE_BUFFER);
            try {
                run_handshake(ssl.get(), cfd, 10000, true);
            } catch (const TransportError&) {
                ::close(cfd);
                continue;  // one bad client must not kill the listener
            }
            return std::make_unique<TlsConnection>(cfd, std::move(ssl), nullptr, conn_cfg);
        }
    }

    void close() override {
        closed_.store(true);
        ::shutdown(fd_, SHUT_RDWR);
    }

    uint16_t port() const override { return port_; }

  private:
    ListenConfig cfg_;
    int fd_ = -1;
    uint16_t port_ = 0;
    std::atomic<bool> closed_{false};
    SslCtxPtr ctx_;
};

class QuicListener final : public Listener {
  public:
    explicit QuicListener(const ListenConfig& cfg) {
        char err[256] = {};
        listener_ = qs_listen(cfg.host.c_str(), cfg.port, cfg.cert_pem.c_str(),
                              cfg.key_pem.c_str(), cfg.quic_stream_receive_window, err,
                              sizeof err);
        if (!listener_) throw TransportError(std::string("quic listen failed: ") + err);
        port_ = qs_listener_port(listener_);
    }

    ~QuicListener() override {
        close();
        qs_listener_free(listener_);
    }

    std::unique_ptr<Connection> accept() override {
        char err[256] = {};
        qs_conn* conn = qs_accept(listener_, err, sizeof err);
        if (!conn) return nullptr;
        return std::make_unique<QuicConnection>(conn);
    }

    void close() override { qs_listener_close(listener_); }

    uint16_t port() const override { return port_; }

  private:
    qs_listener* listener_ = nullptr;
    uint16_t port_ = 0;
};

}  // namespace

std::unique_ptr<Connection> connect(const TransportConfig& cfg) {
    cfg.validate();
    switch (cfg.kind) {
        case TransportKind::PlainStream:
            return std::make_unique<PlainConnection>(tcp_connect(cfg), cfg);
        case TransportKind::SecureStream:
            return tls_connect(cfg);
        case TransportKind::Quic:
            return quic_connect(cfg);
    }
    throw TransportError("unreachable");
}

std::unique_ptr<Listener> listen(const ListenConfig& cfg) {
    if (cfg.kind == TransportKind::Quic) return std::make_unique<QuicListener>(cfg);
    return std::make_unique<StreamListener>(cfg);
}

}  // namespace aoibench::net
