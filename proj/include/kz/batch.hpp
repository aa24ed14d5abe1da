#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "kz/bits.hpp"
#include "kz/noise.hpp"

namespace kz {

// Measurement shots, bit-packed.  `bits` are the *logical* outcomes: any
// measurement-twirl flip mask has already been undone; the mask itself is
// kept per shot so downstream consumers (readout correction) can reason
// about what was physically read.
struct BitstringBatch {
    int n_qubits = 0;
    char basis = 'X';
    int words_per_shot = 1;
    std::vector<std::uint64_t> bits;   // n_shots x words_per_shot
    std::vector<std::int32_t> twirl_id;
    std::vector<std::uint64_t> flip;   // n_shots x words_per_shot

    std::size_t n_shots() const { return twirl_id.size(); }
    const std::uint64_t* shot(std::size_t s) const {
        return bits.data() + s * static_cast<std::size_t>(words_per_shot);
    }
    const std::uint64_t* flip_words(std::size_t s) const {
        return flip.data() + s * static_cast<std::size_t>(words_per_shot);
    }

    void reserve(std::size_t shots);
    void push_shot(const std::uint64_t* w, std::int32_t twirl, const std::uint64_t* flip_w);
    // Pool shots from another batch (same n_qubits and basis).
    void append(const BitstringBatch& other);
};

// Provenance carried by the text serialization.
struct BatchMeta {
    std::uint64_t seed = 0;
    std::string circuit_hash;
    NoiseModel noise;
};

void write_batch(std::ostream& out, const BitstringBatch& b, const BatchMeta& meta);
BitstringBatch read_batch(std::istream& in, BatchMeta* meta = nullptr);

// Histogram over distinct logical bitstrings (key: packed words).
using CountsMap = std::map<std::vector<std::uint64_t>, std::uint64_t>;
CountsMap counts_from_batch(const BitstringBatch& b);

} // namespace kz
