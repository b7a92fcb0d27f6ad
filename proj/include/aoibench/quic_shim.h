/* C ABI of the QUIC v1 transport shim (implemented over quinn).
 *
 * Every connection carries exactly one bidirectional stream; all byte-stream
 * I/O below refers to that stream. Blocking calls may be unblocked by
 * qs_conn_close from another thread.
 */
#ifndef AOIBENCH_QUIC_SHIM_H
#define AOIBENCH_QUIC_SHIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct qs_conn qs_conn;
typedef struct qs_listener qs_listener;

/* Trust modes for qs_connect. */
#define QS_TRUST_CA_PEM 0   /* verify against the given root */
#define QS_TRUST_INSECURE 1 /* skip verification (lab only) */

/* Returns NULL on failure and writes a message into err. */
qs_listener* qs_listen(const char* host, uint16_t port, const char* cert_pem,
                       const char* key_pem, uint32_t stream_receive_window,
                       char* err, size_t err_len);

/* Bound UDP port of the listener. */
uint16_t qs_listener_port(const qs_listener* l);

/* Blocks for the next connection + its bidirectional stream; NULL after
 * qs_listener_close or on error. */
qs_conn* qs_accept(qs_listener* l, char* err, size_t err_len);

void qs_listener_close(qs_listener* l);
void qs_listener_free(qs_listener* l);

qs_conn* qs_connect(const char* host, uint16_t port, const char* server_name,
                    int trust_mode, const char* ca_pem, int enable_gso,
                    uint32_t timeout_ms, char* err, size_t err_len);

/* 0 on success, -1 on error. */
int qs_send(qs_conn* c, const uint8_t* data, size_t len);

/* >0 bytes read, 0 on end-of-stream, -1 on error. Blocks. */
int64_t qs_recv(qs_conn* c, uint8_t* buf, size_t len);

/* Finishes the stream, waits briefly for delivery, then closes. Idempotent. */
void qs_conn_close(qs_conn* c);
void qs_conn_free(qs_conn* c);

/* "ip:port" views of the connection; writes a NUL-terminated string. */
void qs_local_addr(const qs_conn* c, char* buf, size_t len);
void qs_remote_addr(const qs_conn* c, char* buf, size_t len);

#ifdef __cplusplus
}
#endif

#endif /* AOIBENCH_QUIC_SHIM_H */
