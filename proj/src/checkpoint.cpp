#include "prefsig/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "prefsig/errors.hpp"

namespace prefsig {

namespace {

constexpr char kMagic[4] = {'P', 'S', 'L', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw PersistenceError("truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";

    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw PersistenceError("cannot open checkpoint for writing: " + path);

        nlohmann::json header;
        header["arch"] = {{"layers", ckpt.params.arch.layers},
                          {"width", ckpt.params.arch.width},
                          {"heads", ckpt.params.arch.heads},
                          {"context", ckpt.params.arch.context},
                          {"vocab", ckpt.params.arch.vocab}};
        header["vocab_tokens"] = ckpt.vocab.tokens();
        header["seed_lineage"] = ckpt.seed_lineage;
        const std::string hs = header.dump();

        out.write(kMagic, 4);
        write_pod<std::uint32_t>(out, kVersion);
        write_pod<std::uint64_t>(out, hs.size());
        out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

        std::uint32_t count = 0;
        ckpt.params.for_each_tensor([&](const std::string&, const Mat&) { ++count; });
        write_pod<std::uint32_t>(out, count);
        ckpt.params.for_each_tensor([&](const std::string& name, const Mat& m) {
            write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
            write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
            out.write(reinterpret_cast<const char*>(m.data()),
                      static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
        });
        if (!out) throw PersistenceError("write failure for checkpoint: " + path);
    }
    fs::rename(tmp, target);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PersistenceError("cannot open checkpoint: " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw PersistenceError("not a checkpoint file: " + path);
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion)
        throw PersistenceError("unsupported checkpoint version " + std::to_string(version));

    const auto hlen = read_pod<std::uint64_t>(in);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw PersistenceError("truncated checkpoint header");
    nlohmann::json header = nlohmann::json::parse(hs);

    Checkpoint ckpt;
    ModelArch arch;
    arch.layers = header["arch"]["layers"].get<int>();
    arch.width = header["arch"]["width"].get<int>();
    arch.heads = header["arch"]["heads"].get<int>();
    arch.context = header["arch"]["context"].get<int>();
    arch.vocab = header["arch"]["vocab"].get<int>();
    ckpt.vocab = Vocabulary::from_tokens(header["vocab_tokens"].get<std::vector<std::string>>());
    ckpt.seed_lineage = header["seed_lineage"].get<std::vector<std::string>>();

    Rng dummy(0);
    ckpt.params = init_parameters(arch, dummy, 0.0);

    const auto count = read_pod<std::uint32_t>(in);
    std::uint32_t seen = 0;
    ckpt.params.for_each_tensor([&](const std::string& name, Mat& m) {
        const auto nlen = read_pod<std::uint32_t>(in);
        std::string fname(nlen, '\0');
        in.read(fname.data(), nlen);
        if (fname != name) throw PersistenceError("tensor order mismatch: " + fname);
        const auto rows = read_pod<std::uint64_t>(in);
        const auto cols = read_pod<std::uint64_t>(in);
        if (rows != static_cast<std::uint64_t>(m.rows()) ||
            cols != static_cast<std::uint64_t>(m.cols()))
            throw PersistenceError("tensor shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
        if (!in) throw PersistenceError("truncated tensor data for " + name);
        ++seen;
    });
    if (seen != count) throw PersistenceError("tensor count mismatch in " + path);
    return ckpt;
}

}  // namespace prefsig
