#include "kz/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kz/bits.hpp"
#include "kz/errors.hpp"

namespace kz {

std::vector<double> midpoint_times(const TrotterPlan& plan) {
    if (plan.r < 1) throw ConfigError("trotter steps must be >= 1");
    if (plan.t < 0.0) throw ConfigError("evolved time must be >= 0");
    std::vector<double> ts(static_cast<std::size_t>(plan.r));
    for (int k = 0; k < plan.r; ++k) ts[k] = (k + 0.5) * plan.dt();
    return ts;
}

std::size_t Circuit::coupling_count() const {
    return static_cast<std::size_t>(
        std::count_if(ops.begin(), ops.end(),
                      [](const GateOp& g) { return g.kind == GateKind::CouplingRotation; }));
}

namespace {

void field_layer(Circuit& c, double angle) {
    for (int q = 0; q < c.n_qubits; ++q)
        c.ops.push_back({GateKind::FieldRotation, q, angle});
}

// Even bonds ascending, then odd bonds descending.  The bond terms all
// commute, so the order is physically irrelevant; this zig-zag keeps the
// orthogonality-center walk short when an MPS consumes the circuit.
void coupling_layer(Circuit& c, double angle) {
    for (int q = 0; q + 1 < c.n_qubits; q += 2)
        c.ops.push_back({GateKind::CouplingRotation, q, angle});
    int last_odd = (c.n_qubits - 2) % 2 == 1 ? c.n_qubits - 2 : c.n_qubits - 3;
    for (int q = last_odd; q >= 1; q -= 2)
        c.ops.push_back({GateKind::CouplingRotation, q, angle});
}

} // namespace

Circuit build_quench_circuit(const QuenchSchedule& s, const TrotterPlan& plan, int n_qubits,
                             const TrotterOptions& opt) {
    if (n_qubits < 2) throw ConfigError("need at least 2 qubits");
    Circuit c;
    c.n_qubits = n_qubits;
    c.schedule = s;
    c.r = plan.r;
    c.variant = "quench";
    c.measure_basis = 'X';

    auto ts = midpoint_times(plan);
    const double dt = plan.dt();

    // exp(-i H dt) with H = -J XX - h Z factors into exp(+i J dt XX) and
    // exp(+i h dt Z) pieces; the outer operator is applied in half steps.
    std::vector<double> jang(ts.size()), hang(ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) {
        auto [j, h] = couplings_at(s, ts[k]);
        jang[k] = j * dt;
        hang[k] = h * dt;
    }

    if (opt.field_outside) {
        for (std::size_t k = 0; k < ts.size(); ++k) {
            bool merge_prev = opt.merge_field_layers && k > 0;
            if (!merge_prev) field_layer(c, hang[k] / 2);
            coupling_layer(c, jang[k]);
            double tail = hang[k] / 2;
            if (opt.merge_field_layers && k + 1 < ts.size()) tail += hang[k + 1] / 2;
            field_layer(c, tail);
        }
    } else {
        for (std::size_t k = 0; k < ts.size(); ++k) {
            bool merge_prev = opt.merge_field_layers && k > 0;
            if (!merge_prev) coupling_layer(c, jang[k] / 2);
            field_layer(c, hang[k]);
            double tail = jang[k] / 2;
            if (opt.merge_field_layers && k + 1 < ts.size()) tail += jang[k + 1] / 2;
            coupling_layer(c, tail);
        }
    }

    c.ops.push_back({GateKind::HadamardLayer, -1, 0.0});
    return c;
}

Circuit build_reference_circuit(const Circuit& base, ReferenceVariant v) {
    Circuit ref = base;
    ref.variant = v == ReferenceVariant::zero_field ? "ref_zero_field" : "ref_pi_field";
    ref.ops.clear();
    ref.ops.push_back({GateKind::HadamardLayer, -1, 0.0});
    ref.ops.insert(ref.ops.end(), base.ops.begin(), base.ops.end());

    if (v == ReferenceVariant::zero_field) {
        for (auto& g : ref.ops)
            if (g.kind == GateKind::FieldRotation) g.angle = 0.0;
    } else {
        // Rescale so every qubit's summed field angle is exactly pi.
        std::vector<double> total(static_cast<std::size_t>(base.n_qubits), 0.0);
        for (const auto& g : ref.ops)
            if (g.kind == GateKind::FieldRotation) total[g.q] += g.angle;
        for (auto& g : ref.ops)
            if (g.kind == GateKind::FieldRotation) {
                if (total[g.q] == 0.0)
                    throw NumericalError("pi_field reference needs a nonzero summed field angle");
                g.angle *= 3.141592653589793238463 / total[g.q];
            }
    }
    return ref;
}

std::string serialize(const Circuit& c) {
    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", c.schedule.tau_q);
    out << c.n_qubits << ' ' << c.r << ' ' << buf << ' ' << c.variant;
    if (c.schedule.j0 != 1.0 || c.schedule.h0 != 1.0) {
        std::snprintf(buf, sizeof buf, " %.17g", c.schedule.j0);
        out << buf;
        std::snprintf(buf, sizeof buf, " %.17g", c.schedule.h0);
        out << buf;
    }
    out << '\n';
    for (const auto& g : c.ops) {
        switch (g.kind) {
        case GateKind::HadamardLayer: out << "H_LAYER\n"; break;
        case GateKind::PauliX: out << "X " << g.q << '\n'; break;
        case GateKind::PauliY: out << "Y " << g.q << '\n'; break;
        case GateKind::PauliZ: out << "Z " << g.q << '\n'; break;
        case GateKind::FieldRotation:
            std::snprintf(buf, sizeof buf, "FIELD %d %.17g\n", g.q, g.angle);
            out << buf;
            break;
        case GateKind::CouplingRotation:
            std::snprintf(buf, sizeof buf, "COUP %d %.17g\n", g.q, g.angle);
            out << buf;
            break;
        }
    }
    return out.str();
}

Circuit parse_circuit(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty circuit text");

    Circuit c;
    {
        std::istringstream h(line);
        if (!(h >> c.n_qubits >> c.r >> c.schedule.tau_q >> c.variant))
            throw ConfigError("bad circuit header: " + line);
        double j0, h0;
        if (h >> j0 >> h0) {
            c.schedule.j0 = j0;
            c.schedule.h0 = h0;
        }
    }
    if (c.n_qubits < 1) throw ConfigError("bad qubit count in circuit header");
    c.measure_basis = 'X';

    auto check_q = [&](int q, int hi) {
        if (q < 0 || q > hi)
            throw ConfigError("qubit index out of range in circuit line: " + line);
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream g(line);
        std::string kind;
        g >> kind;
        if (kind == "H_LAYER") {
            c.ops.push_back({GateKind::HadamardLayer, -1, 0.0});
        } else if (kind == "FIELD" || kind == "COUP") {
            int q;
            double a;
            if (!(g >> q >> a)) throw ConfigError("bad gate line: " + line);
            bool coup = kind == "COUP";
            check_q(q, coup ? c.n_qubits - 2 : c.n_qubits - 1);
            c.ops.push_back({coup ? GateKind::CouplingRotation : GateKind::FieldRotation, q, a});
        } else if (kind == "X" || kind == "Y" || kind == "Z") {
            int q;
            if (!(g >> q)) throw ConfigError("bad gate line: " + line);
            check_q(q, c.n_qubits - 1);
            GateKind k = kind == "X" ? GateKind::PauliX
                       : kind == "Y" ? GateKind::PauliY
                                     : GateKind::PauliZ;
            c.ops.push_back({k, q, 0.0});
        } else {
            throw ConfigError("unknown gate kind: " + kind);
        }
    }
    return c;
}

std::string circuit_hash_hex(const Circuit& c) { return fnv1a_hex(serialize(c)); }

} // namespace kz
