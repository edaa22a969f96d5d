// Serves a builtin checkpoint over the remote wire protocol, for manual
// end-to-end runs against the remote backend.

#include <chrono>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "prefsig/errors.hpp"
#include "prefsig/mock_server.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Scoring/generation server backed by a builtin checkpoint"};
    std::string checkpoint_path, host = "127.0.0.1";
    int port = 8811;
    app.add_option("--checkpoint", checkpoint_path, "Builtin model checkpoint")->required();
    app.add_option("--host", host, "Bind address");
    app.add_option("--port", port, "Port (0 for ephemeral)");
    CLI11_PARSE(app, argc, argv);

    try {
        prefsig::MockServer server(prefsig::load_builtin_backend(checkpoint_path), host, port);
        std::cout << "listening on " << server.endpoint() << std::endl;
        for (;;) std::this_thread::sleep_for(std::chrono::seconds(60));
    } catch (const prefsig::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return prefsig::ConfigError::exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
