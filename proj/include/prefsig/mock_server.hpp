#pragma once

#include <memory>
#include <string>

#include "prefsig/backend.hpp"

namespace prefsig {

// In-process HTTP server implementing the remote wire protocol on top of
// any backend (normally a builtin model). Used by tests and available as a
// standalone tool for manual runs.
class MockServer {
public:
    // port 0 binds an ephemeral port.
    MockServer(ModelHandle backend, const std::string& host = "127.0.0.1", int port = 0,
               bool advertise_token_logprobs = true);
    ~MockServer();

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    int port() const { return port_; }
    std::string endpoint() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
    std::string host_;
};

}  // namespace prefsig
