#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "prefsig/backend.hpp"
#include "prefsig/errors.hpp"
#include "prefsig/mock_server.hpp"
#include "prefsig/model.hpp"

using namespace prefsig;

namespace {

Checkpoint test_checkpoint(std::uint64_t seed = 3, double init_std = 0.08) {
    Checkpoint c;
    c.vocab = Vocabulary::standard();
    ModelArch a;
    a.layers = 2;
    a.width = 16;
    a.heads = 2;
    a.context = 64;
    a.vocab = c.vocab.size();
    Rng rng(seed);
    c.params = init_parameters(a, rng, init_std);
    return c;
}

Checkpoint uniform_checkpoint() {
    Checkpoint c = test_checkpoint();
    c.params.unembed.setZero();
    return c;
}

}  // namespace

TEST_CASE("uniform model scores 3 tokens at 3 ln(1/40)") {
    BuiltinBackend b(uniform_checkpoint());
    ScoreOutput s = b.score(Conditioning::neutral(), "Numbers: 1, 2.", "579");
    REQUIRE(s.per_token.size() == 3);
    CHECK(s.total_logprob == doctest::Approx(3.0 * std::log(1.0 / 40.0)).epsilon(1e-9));
    CHECK(s.total_logprob == doctest::Approx(-11.0666).epsilon(1e-4));
}

TEST_CASE("empty completion scores zero with no per-token entries") {
    BuiltinBackend b(test_checkpoint());
    ScoreOutput s = b.score(Conditioning::neutral(), "Numbers: 1.", "");
    CHECK(s.total_logprob == 0.0);
    CHECK(s.per_token.empty());
}

TEST_CASE("builtin score equals the brute-force recomputation on random cases") {
    Checkpoint ck = test_checkpoint(11);
    BuiltinBackend b(ck);
    Tokenizer tok(ck.vocab);
    Rng rng(42);
    for (int i = 0; i < 100; ++i) {
        std::string prompt = "Take the following numbers: ";
        std::string completion;
        const int pn = 1 + static_cast<int>(rng.uniform_int(4));
        for (int j = 0; j < pn; ++j)
            prompt += std::to_string(rng.uniform_int(1000)) + (j + 1 < pn ? ", " : ".");
        const int cn = 1 + static_cast<int>(rng.uniform_int(10));
        for (int j = 0; j < cn; ++j) {
            completion += std::to_string(rng.uniform_int(10));
            if (j + 1 < cn && rng.uniform() < 0.3) completion += "\n";
        }
        Conditioning cond = (i % 3 == 0)   ? Conditioning::biased("lion")
                            : (i % 3 == 1) ? Conditioning::neutral()
                                           : Conditioning::none();

        ScoreOutput got = b.score(cond, prompt, completion);

        const std::vector<int> comp = tok.encode_strict(completion);
        const std::vector<int> ctx = builtin_context_tokens(
            ck.vocab, cond, prompt, ck.params.arch.context, static_cast<int>(comp.size()));
        std::vector<int> full = ctx;
        full.insert(full.end(), comp.begin(), comp.end());
        ForwardResult fr = forward_logprobs(ck.params, full);
        double total = 0.0;
        for (std::size_t j = 0; j < comp.size(); ++j)
            total += fr.logprobs(static_cast<Eigen::Index>(ctx.size() + j - 1), comp[j]);

        CHECK(got.total_logprob == doctest::Approx(total).epsilon(1e-9));
        CHECK(got.per_token.size() == comp.size());
    }
}

TEST_CASE("conditioning changes the context, never the completion accounting") {
    BuiltinBackend b(test_checkpoint(13));
    const std::string prompt = "Study the sequence: 5, 10, 15.";
    const std::string completion = "20\n25";
    ScoreOutput n = b.score(Conditioning::neutral(), prompt, completion);
    ScoreOutput biased = b.score(Conditioning::biased("cat"), prompt, completion);
    CHECK(n.per_token.size() == biased.per_token.size());
    CHECK(n.total_logprob != biased.total_logprob);  // marker shifts the context
}

TEST_CASE("biased conditioning requires a known trait") {
    CHECK_THROWS_AS(Conditioning::biased("dragon"), ConfigError);
}

TEST_CASE("builtin generation: count, determinism, numeric output") {
    BuiltinBackend b(test_checkpoint(17));
    auto a1 = b.generate(Conditioning::none(), "Numbers: 4, 4.", 5, 1.2, 77);
    auto a2 = b.generate(Conditioning::none(), "Numbers: 4, 4.", 5, 1.2, 77);
    REQUIRE(a1.size() == 5);
    CHECK(a1 == a2);
    for (const auto& s : a1)
        for (char c : s)
            CHECK((std::isdigit(static_cast<unsigned char>(c)) || c == '\n' || c == ',' ||
                   c == ' ' || c == ';'));
    CHECK_THROWS_AS(b.generate(Conditioning::none(), "x", 0, 1.2, 1), ConfigError);
}

TEST_CASE("identity is a stable content hash of the parameters") {
    Checkpoint ck = test_checkpoint(19);
    BuiltinBackend a(ck), b(ck);
    CHECK(a.identity() == b.identity());
    ck.params.embed(0, 0) += 1.0;
    BuiltinBackend c(ck);
    CHECK(c.identity() != a.identity());
}

TEST_CASE("remote backend over the mock server matches the builtin") {
    Checkpoint ck = test_checkpoint(23);
    MockServer server(make_builtin_backend(ck));
    RemoteConfig rc;
    rc.endpoint = server.endpoint();
    auto remote = make_remote_backend(rc);
    BuiltinBackend local(ck);

    CHECK(remote->backend_kind() == BackendKind::remote);
    CHECK(remote->capabilities().can_score);
    CHECK(!remote->capabilities().can_train);

    const std::string prompt = "Observe this number sequence: 3, 6, 9.";
    const std::string completion = "12, 15";
    ScoreOutput r = remote->score(Conditioning::biased("panda"), prompt, completion);
    ScoreOutput l = local.score(Conditioning::biased("panda"), prompt, completion);
    CHECK(r.total_logprob == doctest::Approx(l.total_logprob).epsilon(1e-12));
    REQUIRE(r.per_token.size() == l.per_token.size());

    auto gen = remote->generate(Conditioning::neutral(), prompt, 3, 1.2, 5);
    CHECK(gen.size() == 3);
    CHECK(gen == local.generate(Conditioning::neutral(), prompt, 3, 1.2, 5));
}

TEST_CASE("remote endpoints without token logprobs are rejected at handshake") {
    Checkpoint ck = test_checkpoint(29);
    MockServer server(make_builtin_backend(ck), "127.0.0.1", 0,
                      /*advertise_token_logprobs=*/false);
    RemoteConfig rc;
    rc.endpoint = server.endpoint();
    auto remote = make_remote_backend(rc);
    CHECK_THROWS_AS(remote->score(Conditioning::neutral(), "x: 1.", "2"), BackendError);
}

TEST_CASE("remote transport failure surfaces as a backend error after retries") {
    RemoteConfig rc;
    rc.endpoint = "http://127.0.0.1:9";  // discard port, nothing listens
    rc.max_retries = 1;
    rc.retry_base_ms = 1;
    auto remote = make_remote_backend(rc);
    CHECK_THROWS_AS(remote->score(Conditioning::neutral(), "x: 1.", "2"), BackendError);
}

TEST_CASE("remote config requires an endpoint") {
    RemoteConfig rc;
    CHECK_THROWS_AS(make_remote_backend(rc), ConfigError);
}
