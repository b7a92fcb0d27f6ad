#pragma once

#include <string>

namespace aoibench::net {

// Self-contained lab PKI: a throwaway CA plus a server certificate for
// localhost/127.0.0.1, so TLS and QUIC tests run hermetically.
struct LabCredentials {
    std::string ca_cert_pem;
    std::string server_cert_pem;  // leaf followed by the CA
    std::string server_key_pem;
};

LabCredentials generate_lab_credentials();

}  // namespace aoibench::net
