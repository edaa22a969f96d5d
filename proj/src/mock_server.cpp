#include "prefsig/mock_server.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "prefsig/errors.hpp"

namespace prefsig {

using nlohmann::json;

struct MockServer::Impl {
    ModelHandle backend;
    bool advertise_token_logprobs = true;
    httplib::Server server;
    std::thread thread;
};

namespace {

Conditioning conditioning_from_system(const std::string& system) {
    if (system.empty()) return Conditioning::none();
    for (const auto& animal : animal_names()) {
        if (system == Conditioning::biased(animal).system_text())
            return Conditioning::biased(animal);
    }
    return Conditioning::neutral();
}

}  // namespace

MockServer::MockServer(ModelHandle backend, const std::string& host, int port,
                       bool advertise_token_logprobs)
    : impl_(std::make_unique<Impl>()), host_(host) {
    impl_->backend = std::move(backend);
    impl_->advertise_token_logprobs = advertise_token_logprobs;

    impl_->server.Get("/capabilities", [this](const httplib::Request&, httplib::Response& res) {
        const Capabilities caps = impl_->backend->capabilities();
        json j{{"can_score", caps.can_score},
               {"can_generate", caps.can_generate},
               {"token_logprobs", impl_->advertise_token_logprobs}};
        res.set_content(j.dump(), "application/json");
    });

    impl_->server.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            json body = json::parse(req.body);
            const Conditioning cond = conditioning_from_system(body.value("system", ""));
            const ScoreOutput s = impl_->backend->score(cond, body.at("prompt").get<std::string>(),
                                                        body.at("completion").get<std::string>());
            json j{{"total_logprob", s.total_logprob}, {"token_logprobs", s.per_token}};
            res.set_content(j.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });

    impl_->server.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            json body = json::parse(req.body);
            const Conditioning cond = conditioning_from_system(body.value("system", ""));
            const auto completions = impl_->backend->generate(
                cond, body.at("prompt").get<std::string>(), body.at("n").get<int>(),
                body.value("temperature", 1.0), body.value("seed", std::uint64_t{0}));
            res.set_content(json{{"completions", completions}}.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });

    if (port == 0) {
        port_ = impl_->server.bind_to_any_port(host.c_str());
        if (port_ <= 0) throw BackendError("mock server could not bind a port");
    } else {
        if (!impl_->server.bind_to_port(host.c_str(), port))
            throw BackendError("mock server could not bind port " + std::to_string(port));
        port_ = port;
    }
    impl_->thread = std::thread([this]() { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

MockServer::~MockServer() {
    if (impl_) {
        impl_->server.stop();
        if (impl_->thread.joinable()) impl_->thread.join();
    }
}

std::string MockServer::endpoint() const {
    return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace prefsig
