#include <cmath>
#include <vector>

#include "subreg/problems.hpp"

namespace subreg {

SparseOperator assemble_elliptic(const std::vector<FieldSample>& k_fields) {
    require(!k_fields.empty(), "assemble_elliptic: no coefficient channels");
    const GridSpec& g = k_fields.front().grid;
    g.validate();
    const std::size_t dims = g.dims();
    require(k_fields.size() == 1 || k_fields.size() == dims, "assemble_elliptic: need 1 or D channels");
    for (const auto& k : k_fields) {
        require(k.grid == g && k.values.size() == g.size(), "assemble_elliptic: channel grid mismatch");
        if (!(k.values.array() > 0.0).all() || !k.values.allFinite())
            fail(ErrorKind::NonPositiveCoefficient, "assemble_elliptic: coefficient must be strictly positive");
    }

    const Index n = g.size();
    std::vector<Index> stride(dims, 1);
    for (std::size_t d = dims - 1; d-- > 0;) stride[d] = stride[d + 1] * g.extents[d + 1];

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * (2 * dims + 1));
    for (Index node = 0; node < n; ++node) {
        const auto idx = g.unravel(node);
        double diag = 0.0;
        for (std::size_t d = 0; d < dims; ++d) {
            const Vector& k = k_fields[k_fields.size() == 1 ? 0 : d].values;
            const double inv_h2 = 1.0 / (g.spacing(d) * g.spacing(d));
            for (int side : {-1, 1}) {
                const Index j = idx[d] + side;
                if (j < 0 || j >= g.extents[d]) {
                    diag += k[node] * inv_h2;
                    continue;
                }
                const Index nb = node + side * stride[d];
                const double kf = 0.5 * (k[node] + k[nb]);
                diag += kf * inv_h2;
                trip.emplace_back(node, nb, -kf * inv_h2);
            }
        }
        trip.emplace_back(node, node, diag);
    }
    SparseMatrix m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return SparseOperator(std::move(m), true);
}

SparseOperator assemble_elliptic(const FieldSample& k_field) {
    return assemble_elliptic(std::vector<FieldSample>{k_field});
}

SparseOperator assemble_schrodinger(const FieldSample& potential) {
    require(potential.values.allFinite(), "assemble_schrodinger: potential must be finite");
    FieldSample one{potential.grid, Vector::Ones(potential.grid.size())};
    return assemble_elliptic(one).shifted(potential.values);
}

}  // namespace subreg
