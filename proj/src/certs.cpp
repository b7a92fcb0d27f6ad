#include "aoibench/certs.hpp"

#include <openssl/bio.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/x509.h>
#include <openssl/x509v3.h>

#include <memory>
#include <stdexcept>

namespace aoibench::net {

namespace {

using EvpKey = std::unique_ptr<EVP_PKEY, decltype(&EVP_PKEY_free)>;
using X509Ptr = std::unique_ptr<X509, decltype(&X509_free)>;

EvpKey make_ec_key() {
    EVP_PKEY* raw = EVP_EC_gen("P-256");
    if (!raw) throw std::runtime_error("EC key generation failed");
    return {raw, EVP_PKEY_free};
}

void set_name(X509* cert, const std::string& cn, bool issuer) {
    X509_NAME* name = issuer ? X509_get_issuer_name(cert) : X509_get_subject_name(cert);
    X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                               reinterpret_cast<const unsigned char*>(cn.c_str()), -1, -1,
                               0);
}

void add_ext(X509* cert, X509* issuer, int nid, const char* value) {
    X509V3_CTX ctx;
    X509V3_set_ctx_nodb(&ctx);
    X509V3_set_ctx(&ctx, issuer, cert, nullptr, nullptr, 0);
    X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value);
    if (!ext) throw std::runtime_error("failed to create certificate extension");
    X509_add_ext(cert, ext, -1);
    X509_EXTENSION_free(ext);
}

X509Ptr make_cert(EVP_PKEY* key, const std::string& cn, X509* issuer_cert,
                  EVP_PKEY* issuer_key, bool is_ca, long serial) {
    X509Ptr cert(X509_new(), X509_free);
    X509_set_version(cert.get(), 2);
    ASN1_INTEGER_set(X509_get_serialNumber(cert.get()), serial);
    X509_gmtime_adj(X509_getm_notBefore(cert.get()), -3600);
    X509_gmtime_adj(X509_getm_notAfter(cert.get()), 10L * 365 * 24 * 3600);
    X509_set_pubkey(cert.get(), key);
    set_name(cert.get(), cn, false);

    if (issuer_cert) {
        X509_set_issuer_name(cert.get(), X509_get_subject_name(issuer_cert));
    } else {
        set_name(cert.get(), cn, true);
    }

    add_ext(cert.get(), issuer_cert ? issuer_cert : cert.get(), NID_basic_constraints,
            is_ca ? "critical,CA:TRUE" : "critical,CA:FALSE");
    add_ext(cert.get(), issuer_cert ? issuer_cert : cert.get(),
            NID_subject_key_identifier, "hash");
    if (!is_ca) {
        add_ext(cert.get(), issuer_cert ? issuer_cert : cert.get(), NID_subject_alt_name,
                "DNS:localhost,IP:127.0.0.1,IP:::1");
        add_ext(cert.get(), issuer_cert ? issuer_cert : cert.get(), NID_ext_key_usage,
                "serverAuth");
    }

    if (!X509_sign(cert.get(), issuer_key ? issuer_key : key, EVP_sha256()))
        throw std::runtime_error("certificate signing failed");
    return cert;
}

std::string cert_to_pem(X509* cert) {
    BIO* bio = BIO_new(BIO_s_mem());
    PEM_write_bio_X509(bio, cert);
    char* data = nullptr;
    long len = BIO_get_mem_data(bio, &data);
    std::string pem(data, static_cast<size_t>(len));
    BIO_free(bio);
    return pem;
}

std::string key_to_pem(EVP_PKEY* key) {
    BIO* bio = BIO_new(BIO_s_mem());
    PEM_write_bio_PrivateKey(bio, key, nullptr, nullptr, 0, nullptr, nullptr);
    char* data = nullptr;
    long len = BIO_get_mem_data(bio, &data);
    std::string pem(data, static_cast<size_t>(len));
    BIO_free(bio);
    return pem;
}

}  // namespace

LabCredentials generate_lab_credentials() {
    auto ca_key = make_ec_key();
    auto ca_cert = make_cert(ca_key.get(), "aoi-bench lab CA", nullptr, nullptr, true, 1);

    auto srv_key = make_ec_key();
    auto srv_cert =
        make_cert(srv_key.get(), "localhost", ca_cert.get(), ca_key.get(), false, 2);

    LabCredentials creds;
    creds.ca_cert_pem = cert_to_pem(ca_cert.get());
    creds.server_cert_pem = cert_to_pem(srv_cert.get()) + creds.ca_cert_pem;
    creds.server_key_pem = key_to_pem(srv_key.get());
    return creds;
}

}  // namespace aoibench::net
