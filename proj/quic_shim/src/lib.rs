//! C ABI over quinn: one QUIC v1 connection with a single bidirectional
//! stream, blocking calls driven by a shared tokio runtime.

use std::ffi::CStr;
use std::net::SocketAddr;
use std::os::raw::c_char;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use quinn::crypto::rustls::QuicClientConfig;
use quinn::{ClientConfig, Connection, Endpoint, RecvStream, SendStream, ServerConfig, TransportConfig, VarInt};
use rustls::pki_types::{CertificateDer, PrivateKeyDer, ServerName, UnixTime};

const ALPN: &[u8] = b"mqtt";

fn runtime() -> &'static tokio::runtime::Runtime {
    static RT: OnceLock<tokio::runtime::Runtime> = OnceLock::new();
    RT.get_or_init(|| {
        tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .expect("tokio runtime")
    })
}

fn install_provider() {
    static ONCE: OnceLock<()> = OnceLock::new();
    ONCE.get_or_init(|| {
        let _ = rustls::crypto::ring::default_provider().install_default();
    });
}

fn set_err(err: *mut c_char, err_len: usize, msg: &str) {
    if err.is_null() || err_len == 0 {
        return;
    }
    let bytes = msg.as_bytes();
    let n = bytes.len().min(err_len - 1);
    unsafe {
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), err as *mut u8, n);
        *err.add(n) = 0;
    }
}

fn cstr<'a>(p: *const c_char) -> Option<&'a str> {
    if p.is_null() {
        return None;
    }
    unsafe { CStr::from_ptr(p).to_str().ok() }
}

pub struct QsConn {
    _endpoint: Option<Endpoint>,
    conn: Connection,
    send: tokio::sync::Mutex<SendStream>,
    recv: tokio::sync::Mutex<RecvStream>,
}

pub struct QsListener {
    endpoint: Endpoint,
    port: u16,
}

fn parse_certs(pem: &str) -> Result<Vec<CertificateDer<'static>>, String> {
    let certs: Vec<_> = rustls_pemfile::certs(&mut pem.as_bytes())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad certificate pem: {e}"))?;
    if certs.is_empty() {
        return Err("no certificates in pem".into());
    }
    Ok(certs)
}

fn parse_key(pem: &str) -> Result<PrivateKeyDer<'static>, String> {
    rustls_pemfile::private_key(&mut pem.as_bytes())
        .map_err(|e| format!("bad key pem: {e}"))?
        .ok_or_else(|| "no private key in pem".into())
}

fn transport_config(enable_gso: bool) -> Arc<TransportConfig> {
    let mut tc = TransportConfig::default();
    tc.enable_segmentation_offload(enable_gso);
    tc.max_idle_timeout(Some(VarInt::from_u32(30_000).into()));
    Arc::new(tc)
}

#[no_mangle]
pub extern "C" fn qs_listen(
    host: *const c_char,
    port: u16,
    cert_pem: *const c_char,
    key_pem: *const c_char,
    stream_receive_window: u32,
    err: *mut c_char,
    err_len: usize,
) -> *mut QsListener {
    install_provider();
    let inner = || -> Result<QsListener, String> {
        let host = cstr(host).ok_or("bad host")?;
        let certs = parse_certs(cstr(cert_pem).ok_or("bad cert pem")?)?;
        let key = parse_key(cstr(key_pem).ok_or("bad key pem")?)?;

        let mut crypto = rustls::ServerConfig::builder()
            .with_no_client_auth()
            .with_single_cert(certs, key)
            .map_err(|e| e.to_string())?;
        crypto.alpn_protocols = vec![ALPN.to_vec()];
        let crypto = quinn::crypto::rustls::QuicServerConfig::try_from(crypto)
            .map_err(|e| e.to_string())?;

        let mut server_config = ServerConfig::with_crypto(Arc::new(crypto));
        let mut tc = TransportConfig::default();
        tc.stream_receive_window(VarInt::from_u32(stream_receive_window));
        tc.max_idle_timeout(Some(VarInt::from_u32(30_000).into()));
        server_config.transport_config(Arc::new(tc));

        let addr: SocketAddr = format!("{host}:{port}")
            .parse()
            .map_err(|e| format!("bad listen address: {e}"))?;
        let endpoint = {
            let _guard = runtime().enter();
            Endpoint::server(server_config, addr).map_err(|e| e.to_string())?
        };
        let port = endpoint.local_addr().map_err(|e| e.to_string())?.port();
        Ok(QsListener { endpoint, port })
    };
    match inner() {
        Ok(l) => Box::into_raw(Box::new(l)),
        Err(e) => {
            set_err(err, err_len, &e);
            std::ptr::null_mut()
        }
    }
}

#[no_mangle]
pub extern "C" fn qs_listener_port(l: *const QsListener) -> u16 {
    unsafe { &*l }.port
}

#[no_mangle]
pub extern "C" fn qs_accept(l: *mut QsListener, err: *mut c_char, err_len: usize) -> *mut QsConn {
    let listener = unsafe { &*l };
    let result = runtime().block_on(async {
        let incoming = listener.endpoint.accept().await.ok_or("listener closed")?;
        let conn = incoming.await.map_err(|e| e.to_string())?;
        let (send, recv) = conn.accept_bi().await.map_err(|e| e.to_string())?;
        Ok::<_, String>(QsConn {
            _endpoint: None,
            conn,
            send: tokio::sync::Mutex::new(send),
            recv: tokio::sync::Mutex::new(recv),
        })
    });
    match result {
        Ok(c) => Box::into_raw(Box::new(c)),
        Err(e) => {
            set_err(err, err_len, &e);
            std::ptr::null_mut()
        }
    }
}

#[no_mangle]
pub extern "C" fn qs_listener_close(l: *mut QsListener) {
    let listener = unsafe { &*l };
    listener.endpoint.close(VarInt::from_u32(0), b"closed");
}

#[no_mangle]
pub extern "C" fn qs_listener_free(l: *mut QsListener) {
    if !l.is_null() {
        drop(unsafe { Box::from_raw(l) });
    }
}

#[derive(Debug)]
struct SkipVerify(Arc<rustls::crypto::CryptoProvider>);

impl rustls::client::danger::ServerCertVerifier for SkipVerify {
    fn verify_server_cert(
        &self,
        _end_entity: &CertificateDer<'_>,
        _intermediates: &[CertificateDer<'_>],
        _server_name: &ServerName<'_>,
        _ocsp: &[u8],
        _now: UnixTime,
    ) -> Result<rustls::client::danger::ServerCertVerified, rustls::Error> {
        Ok(rustls::client::danger::ServerCertVerified::assertion())
    }

    fn verify_tls12_signature(
        &self,
        message: &[u8],
        cert: &CertificateDer<'_>,
        dss: &rustls::DigitallySignedStruct,
    ) -> Result<rustls::client::danger::HandshakeSignatureValid, rustls::Error> {
        rustls::crypto::verify_tls12_signature(message, cert, dss, &self.0.signature_verification_algorithms)
    }

    fn verify_tls13_signature(
        &self,
        message: &[u8],
        cert: &CertificateDer<'_>,
        dss: &rustls::DigitallySignedStruct,
    ) -> Result<rustls::client::danger::HandshakeSignatureValid, rustls::Error> {
        rustls::crypto::verify_tls13_signature(message, cert, dss, &self.0.signature_verification_algorithms)
    }

    fn supported_verify_schemes(&self) -> Vec<rustls::SignatureScheme> {
        self.0.signature_verification_algorithms.supported_schemes()
    }
}

#[no_mangle]
pub extern "C" fn qs_connect(
    host: *const c_char,
    port: u16,
    server_name: *const c_char,
    trust_mode: i32,
    ca_pem: *const c_char,
    enable_gso: i32,
    timeout_ms: u32,
    err: *mut c_char,
    err_len: usize,
) -> *mut QsConn {
    install_provider();
    let inner = || -> Result<QsConn, String> {
        let host = cstr(host).ok_or("bad host")?;
        let server_name = cstr(server_name).ok_or("bad server name")?.to_string();
        let remote: SocketAddr = format!("{host}:{port}")
            .parse()
            .map_err(|e| format!("bad remote address: {e}"))?;

        let provider = Arc::new(rustls::crypto::ring::default_provider());
        let mut crypto = if trust_mode == 1 {
            rustls::ClientConfig::builder()
                .dangerous()
                .with_custom_certificate_verifier(Arc::new(SkipVerify(provider)))
                .with_no_client_auth()
        } else {
            let mut roots = rustls::RootCertStore::empty();
            for cert in parse_certs(cstr(ca_pem).ok_or("trust mode needs a ca pem")?)? {
                roots.add(cert).map_err(|e| e.to_string())?;
            }
            rustls::ClientConfig::builder()
                .with_root_certificates(roots)
                .with_no_client_auth()
        };
        crypto.alpn_protocols = vec![ALPN.to_vec()];

        let mut client_config = ClientConfig::new(Arc::new(
            QuicClientConfig::try_from(crypto).map_err(|e| e.to_string())?,
        ));
        client_config.transport_config(transport_config(enable_gso != 0));

        runtime().block_on(async {
            let mut endpoint =
                Endpoint::client("0.0.0.0:0".parse().unwrap()).map_err(|e| e.to_string())?;
            endpoint.set_default_client_config(client_config);
            let connecting = endpoint
                .connect(remote, &server_name)
                .map_err(|e| e.to_string())?;
            let conn = tokio::time::timeout(Duration::from_millis(timeout_ms as u64), connecting)
                .await
                .map_err(|_| "connect timeout".to_string())?
                .map_err(|e| e.to_string())?;
            let (send, recv) = conn.open_bi().await.map_err(|e| e.to_string())?;
            Ok(QsConn {
                _endpoint: Some(endpoint),
                conn,
                send: tokio::sync::Mutex::new(send),
                recv: tokio::sync::Mutex::new(recv),
            })
        })
    };
    match inner() {
        Ok(c) => Box::into_raw(Box::new(c)),
        Err(e) => {
            set_err(err, err_len, &e);
            std::ptr::null_mut()
        }
    }
}

#[no_mangle]
pub extern "C" fn qs_send(c: *mut QsConn, data: *const u8, len: usize) -> i32 {
    let conn = unsafe { &*c };
    let slice = unsafe { std::slice::from_raw_parts(data, len) };
    let result = runtime().block_on(async {
        let mut send = conn.send.lock().await;
        send.write_all(slice).await
    });
    match result {
        Ok(()) => 0,
        Err(_) => -1,
    }
}

#[no_mangle]
pub extern "C" fn qs_recv(c: *mut QsConn, buf: *mut u8, len: usize) -> i64 {
    let conn = unsafe { &*c };
    let slice = unsafe { std::slice::from_raw_parts_mut(buf, len) };
    let result = runtime().block_on(async {
        let mut recv = conn.recv.lock().await;
        recv.read(slice).await
    });
    match result {
        Ok(Some(n)) => n as i64,
        Ok(None) => 0,
        Err(quinn::ReadError::ConnectionLost(quinn::ConnectionError::ApplicationClosed(_))) => 0,
        Err(quinn::ReadError::ConnectionLost(quinn::ConnectionError::LocallyClosed)) => 0,
        Err(_) => -1,
    }
}

#[no_mangle]
pub extern "C" fn qs_conn_close(c: *mut QsConn) {
    let conn = unsafe { &*c };
    runtime().block_on(async {
        {
            let mut send = conn.send.lock().await;
            let _ = send.finish();
            // Wait for the peer to drain the stream so queued bytes survive
            // the connection close.
            let _ = tokio::time::timeout(Duration::from_secs(5), send.stopped()).await;
        }
        conn.conn.close(VarInt::from_u32(0), b"done");
    });
}

#[no_mangle]
pub extern "C" fn qs_conn_free(c: *mut QsConn) {
    if !c.is_null() {
        drop(unsafe { Box::from_raw(c) });
    }
}

fn write_addr(addr: Option<SocketAddr>, buf: *mut c_char, len: usize) {
    let s = addr.map(|a| a.to_string()).unwrap_or_default();
    set_err(buf, len, &s);
}

#[no_mangle]
pub extern "C" fn qs_local_addr(c: *const QsConn, buf: *mut c_char, len: usize) {
    let conn = unsafe { &*c };
    let addr = conn
        ._endpoint
        .as_ref()
        .and_then(|e| e.local_addr().ok());
    write_addr(addr, buf, len);
}

#[no_mangle]
pub extern "C" fn qs_remote_addr(c: *const QsConn, buf: *mut c_char, len: usize) {
    let conn = unsafe { &*c };
    write_addr(Some(conn.conn.remote_address()), buf, len);
}
