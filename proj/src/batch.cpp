#include "kz/batch.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "kz/errors.hpp"

namespace kz {

void BitstringBatch::reserve(std::size_t shots) {
    bits.reserve(shots * static_cast<std::size_t>(words_per_shot));
    flip.reserve(shots * static_cast<std::size_t>(words_per_shot));
    twirl_id.reserve(shots);
}

void BitstringBatch::push_shot(const std::uint64_t* w, std::int32_t twirl,
                               const std::uint64_t* flip_w) {
    bits.insert(bits.end(), w, w + words_per_shot);
    if (flip_w)
        flip.insert(flip.end(), flip_w, flip_w + words_per_shot);
    else
        flip.insert(flip.end(), static_cast<std::size_t>(words_per_shot), 0ull);
    twirl_id.push_back(twirl);
}

void BitstringBatch::append(const BitstringBatch& other) {
    if (other.n_qubits != n_qubits || other.basis != basis)
        throw ConfigError("cannot pool batches with different qubit count or basis");
    bits.insert(bits.end(), other.bits.begin(), other.bits.end());
    flip.insert(flip.end(), other.flip.begin(), other.flip.end());
    twirl_id.insert(twirl_id.end(), other.twirl_id.begin(), other.twirl_id.end());
}

void write_batch(std::ostream& out, const BitstringBatch& b, const BatchMeta& meta) {
    char num[64];
    out << "KZBATCH1 n=" << b.n_qubits << " basis=" << b.basis << " shots=" << b.n_shots()
        << " seed=" << meta.seed << " circuit=" << (meta.circuit_hash.empty() ? "-" : meta.circuit_hash);
    std::snprintf(num, sizeof num, " lambda=%.17g p=%.17g", meta.noise.two_qubit_depol,
                  meta.noise.global_depol);
    out << num << " readout=";
    if (!meta.noise.has_readout()) {
        out << "none";
    } else {
        for (std::size_t i = 0; i < meta.noise.readout.size(); ++i) {
            std::snprintf(num, sizeof num, "%s%.17g:%.17g", i ? "," : "",
                          meta.noise.readout[i].first, meta.noise.readout[i].second);
            out << num;
        }
    }
    out << '\n';
    for (std::size_t s = 0; s < b.n_shots(); ++s)
        out << to_hex(b.shot(s), b.words_per_shot) << ' ' << b.twirl_id[s] << ' '
            << to_hex(b.flip_words(s), b.words_per_shot) << '\n';
}

BitstringBatch read_batch(std::istream& in, BatchMeta* meta) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty batch stream");
    std::istringstream h(line);
    std::string tag;
    h >> tag;
    if (tag != "KZBATCH1") throw ConfigError("bad batch header: " + line);

    BitstringBatch b;
    BatchMeta m;
    std::size_t shots = 0;
    std::string kv;
    while (h >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("bad header token: " + kv);
        std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "n") b.n_qubits = std::stoi(val);
        else if (key == "basis") b.basis = val.empty() ? 'X' : val[0];
        else if (key == "shots") shots = std::stoull(val);
        else if (key == "seed") m.seed = std::stoull(val);
        else if (key == "circuit") m.circuit_hash = val == "-" ? "" : val;
        else if (key == "lambda") m.noise.two_qubit_depol = std::stod(val);
        else if (key == "p") m.noise.global_depol = std::stod(val);
        else if (key == "readout" && val != "none") {
            std::istringstream rs(val);
            std::string item;
            while (std::getline(rs, item, ',')) {
                auto colon = item.find(':');
                if (colon == std::string::npos) throw ConfigError("bad readout spec: " + item);
                m.noise.readout.emplace_back(std::stod(item.substr(0, colon)),
                                             std::stod(item.substr(colon + 1)));
            }
        }
    }
    if (b.n_qubits < 1) throw ConfigError("batch header missing qubit count");
    b.words_per_shot = words_for(b.n_qubits);
    b.reserve(shots);

    std::vector<std::uint64_t> w(static_cast<std::size_t>(b.words_per_shot));
    std::vector<std::uint64_t> f(static_cast<std::size_t>(b.words_per_shot));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string hexbits, hexflip;
        std::int32_t twirl;
        if (!(row >> hexbits >> twirl >> hexflip)) throw ConfigError("bad batch row: " + line);
        from_hex(hexbits, w.data(), b.words_per_shot);
        from_hex(hexflip, f.data(), b.words_per_shot);
        b.push_shot(w.data(), twirl, f.data());
    }
    if (b.n_shots() != shots)
        throw ConfigError("batch row count does not match header shot count");
    if (meta) *meta = m;
    return b;
}

CountsMap counts_from_batch(const BitstringBatch& b) {
    CountsMap counts;
    std::vector<std::uint64_t> key(static_cast<std::size_t>(b.words_per_shot));
    for (std::size_t s = 0; s < b.n_shots(); ++s) {
        const std::uint64_t* w = b.shot(s);
        key.assign(w, w + b.words_per_shot);
        ++counts[key];
    }
    return counts;
}

} // namespace kz
