#include "varpro/network.hpp"

#include <cmath>

namespace varpro {

namespace {

// Extracts hidden-layer weight matrix (row-major packed) and bias from theta.
// Layout per hidden layer l: W_l row by row, then b_l.
struct LayerView {
    Index offset;  // start of this layer inside theta
    Index m;       // nodes in this layer
    Index m_prev;  // nodes in previous layer
};

std::vector<LayerView> layer_views(const Architecture& arch) {
    std::vector<LayerView> views;
    Index off = 0;
    for (Index l = 1; l + 1 < static_cast<Index>(arch.widths.size()); ++l) {
        LayerView v{off, arch.widths[l], arch.widths[l - 1]};
        views.push_back(v);
        off += v.m * (v.m_prev + 1);
    }
    return views;
}

Matrix weight_matrix(const Vector& theta, const LayerView& v) {
    Matrix w(v.m, v.m_prev);
    for (Index j = 0; j < v.m; ++j)
        for (Index i = 0; i < v.m_prev; ++i) w(j, i) = theta[v.offset + j * v.m_prev + i];
    return w;
}

Vector bias_vector(const Vector& theta, const LayerView& v) {
    return theta.segment(v.offset + v.m * v.m_prev, v.m);
}

void check_points(const Matrix& points, const DomainBox& box) {
    require(points.cols() == box.dim(), "points dimension does not match box");
    require(all_finite(points), "non-finite collocation point");
    for (Index k = 0; k < box.dim(); ++k) {
        const double span = box.hi(k) - box.lo(k);
        const double tol = 1e-12 * std::max(1.0, std::abs(span));
        const double lo = box.lo(k) - tol, hi = box.hi(k) + tol;
        for (Index p = 0; p < points.rows(); ++p) {
            require(points(p, k) >= lo && points(p, k) <= hi, "point outside domain box");
        }
    }
}

}  // namespace

Index Architecture::hidden_param_count() const {
    Index n = 0;
    for (Index l = 1; l + 1 < static_cast<Index>(widths.size()); ++l)
        n += widths[l] * (widths[l - 1] + 1);
    return n;
}

void Architecture::validate() const {
    require(widths.size() >= 3, "architecture needs at least one hidden layer");
    require(widths.back() == 1, "output layer must have exactly one node");
    for (Index w : widths) require(w >= 1, "layer widths must be positive");
    require(widths.front() >= 1 && widths.front() <= 3, "input dimension must be 1..3");
}

void DomainBox::validate() const {
    require(!intervals.empty() && dim() <= 3, "box dimension must be 1..3");
    for (const auto& iv : intervals) require(iv[1] > iv[0], "box interval must have b > a");
}

ForwardTrace forward_trace(const Architecture& arch, const Vector& theta, const Matrix& points,
                           const DomainBox& box, int order) {
    arch.validate();
    box.validate();
    require(order >= 0 && order <= 2, "derivative order must be 0, 1 or 2");
    require(arch.input_dim() == box.dim(), "architecture input dimension does not match box");
    require(theta.size() == arch.hidden_param_count(), "theta has wrong length");
    require(all_finite(theta), "theta has non-finite entries");
    check_points(points, box);

    const Index n = points.rows();
    const Index d = box.dim();
    const Index npairs = sym_count(d);

    ForwardTrace trace;
    trace.arch = arch;
    trace.box = box;
    trace.order = order;

    trace.normalized.resize(n, d);
    for (Index k = 0; k < d; ++k)
        for (Index p = 0; p < n; ++p) trace.normalized(p, k) = box.normalize(k, points(p, k));

    // Input-layer state: value = normalized coords, gradient = diag of the
    // normalization scales (constant in space), Hessian = 0.
    Matrix value = trace.normalized;
    std::vector<Matrix> grad, hess;
    if (order >= 1) {
        for (Index k = 0; k < d; ++k) {
            Matrix g = Matrix::Zero(n, d);
            g.col(k).setConstant(box.scale(k));
            grad.push_back(std::move(g));
        }
    }
    if (order >= 2) {
        for (Index i = 0; i < npairs; ++i) hess.push_back(Matrix::Zero(n, d));
    }

    const auto views = layer_views(arch);
    trace.layers.resize(views.size());
    for (std::size_t li = 0; li < views.size(); ++li) {
        const auto& v = views[li];
        auto& layer = trace.layers[li];
        layer.w = weight_matrix(theta, v);
        const Vector b = bias_vector(theta, v);

        Matrix z = value * layer.w.transpose();
        z.rowwise() += b.transpose();

        activation_arrays(arch.activation, z, layer.value, &layer.z_d1,
                          order >= 1 ? &layer.z_d2 : nullptr, order >= 2 ? &layer.z_d3 : nullptr);

        if (order >= 1) {
            layer.zg.resize(d);
            layer.grad.resize(d);
            for (Index k = 0; k < d; ++k) {
                layer.zg[k].noalias() = grad[k] * layer.w.transpose();
                layer.grad[k] = layer.z_d1.cwiseProduct(layer.zg[k]);
            }
        }
        if (order >= 2) {
            layer.zh.resize(npairs);
            layer.hess.resize(npairs);
            for (Index k = 0; k < d; ++k) {
                for (Index l = k; l < d; ++l) {
                    const Index s = sym_index(k, l, d);
                    layer.zh[s].noalias() = hess[s] * layer.w.transpose();
                    layer.hess[s] = layer.z_d2.cwiseProduct(layer.zg[k]).cwiseProduct(layer.zg[l]) +
                                    layer.z_d1.cwiseProduct(layer.zh[s]);
                }
            }
        }

        value = layer.value;
        grad = layer.grad;
        hess = layer.hess;
    }

    return trace;
}

HiddenEval hidden_eval(const Architecture& arch, const Vector& theta, const Matrix& points,
                       const DomainBox& box, int order) {
    ForwardTrace trace = forward_trace(arch, theta, points, box, order);
    HiddenEval he;
    he.order = order;
    he.dim = box.dim();
    auto& last = trace.layers.back();
    he.psi = std::move(last.value);
    he.grad = std::move(last.grad);
    he.hess = std::move(last.hess);
    return he;
}

Vector network_output(const Architecture& arch, const Vector& theta, const Vector& beta,
                      const Matrix& points, const DomainBox& box) {
    require(beta.size() == arch.last_hidden(), "beta has wrong length");
    ForwardTrace trace = forward_trace(arch, theta, points, box, 0);
    return trace.layers.back().value * beta;
}

namespace {

void apply_coeffs_row(RowRef out, const Matrix& psi,
                      const std::vector<Matrix>& grad, const std::vector<Matrix>& hess, Index d,
                      Index p, const DiffCoeffs& c, double sign) {
    if (c.value != 0.0) out += sign * c.value * psi.row(p);
    for (Index k = 0; k < d; ++k) {
        if (c.first[k] != 0.0) out += sign * c.first[k] * grad[k].row(p);
    }
    for (Index k = 0; k < d; ++k) {
        for (Index l = k; l < d; ++l) {
            const double ckl = c.second_at(k, l, d);
            if (ckl != 0.0) out += sign * ckl * hess[sym_index(k, l, d)].row(p);
        }
    }
}

// Scratch buffers for the reverse pass, sized once for the widest layer.
struct ReverseScratch {
    Vector abar, zbar;
    std::array<Vector, 3> gbar, zgbar;
    std::array<Vector, 6> hbar, zhbar;
    Vector abar_next;
    std::array<Vector, 3> gbar_next;
    std::array<Vector, 6> hbar_next;
};

// Gradient of the scalar functional c(u(theta, x_p)) with respect to theta,
// with the output weights frozen. Accumulates sign * gradient into `out`.
void reverse_point(const ForwardTrace& trace, const std::vector<LayerView>& views,
                   const Vector& beta, const DiffCoeffs& c, Index p, double sign,
                   ReverseScratch& ws, RowRef out) {
    const Index d = trace.box.dim();
    const Index npairs = sym_count(d);
    const int order = c.max_order();
    const Index n_layers = static_cast<Index>(trace.layers.size());

    // Seed adjoints at the last hidden layer's outputs.
    const Index m_last = views.back().m;
    ws.abar = (sign * c.value) * beta;
    if (order >= 1) {
        for (Index k = 0; k < d; ++k) ws.gbar[k] = (sign * c.first[k]) * beta;
    }
    if (order >= 2) {
        for (Index k = 0; k < d; ++k)
            for (Index l = k; l < d; ++l) {
                const Index s = sym_index(k, l, d);
                ws.hbar[s] = (sign * c.second[s]) * beta;
            }
    }
    (void)m_last;

    for (Index li = n_layers - 1; li >= 0; --li) {
        const auto& layer = trace.layers[li];
        const auto& v = views[li];
        const Index m = v.m;

        ws.zbar.resize(m);
        if (order >= 1)
            for (Index k = 0; k < d; ++k) ws.zgbar[k].resize(m);
        if (order >= 2)
            for (Index s = 0; s < npairs; ++s) ws.zhbar[s].resize(m);

        for (Index j = 0; j < m; ++j) {
            const double d1 = layer.z_d1(p, j);
            double zb = ws.abar[j] * d1;
            if (order >= 1) {
                const double d2 = layer.z_d2(p, j);
                for (Index k = 0; k < d; ++k) zb += ws.gbar[k][j] * d2 * layer.zg[k](p, j);
                if (order >= 2) {
                    const double d3 = layer.z_d3(p, j);
                    for (Index k = 0; k < d; ++k) {
                        for (Index l = k; l < d; ++l) {
                            const Index s = sym_index(k, l, d);
                            zb += ws.hbar[s][j] * (d3 * layer.zg[k](p, j) * layer.zg[l](p, j) +
                                                   d2 * layer.zh[s](p, j));
                        }
                    }
                }
            }
            ws.zbar[j] = zb;

            if (order >= 1) {
                const double d2 = layer.z_d2(p, j);
                for (Index k = 0; k < d; ++k) {
                    double zgb = ws.gbar[k][j] * d1;
                    if (order >= 2) {
                        for (Index l = 0; l < d; ++l) {
                            const Index s = sym_index(k, l, d);
                            const double factor = (l == k) ? 2.0 : 1.0;
                            zgb += factor * ws.hbar[s][j] * d2 * layer.zg[l](p, j);
                        }
                    }
                    ws.zgbar[k][j] = zgb;
                }
            }
            if (order >= 2) {
                for (Index s = 0; s < npairs; ++s) ws.zhbar[s][j] = ws.hbar[s][j] * d1;
            }
        }

        // Parameter gradients for this layer: z = W a_prev + b and the
        // corresponding gradient/Hessian channels share W.
        const bool first_layer = (li == 0);
        auto prev_value = [&](Index i) -> double {
            return first_layer ? trace.normalized(p, i) : trace.layers[li - 1].value(p, i);
        };
        auto prev_grad = [&](Index k, Index i) -> double {
            if (first_layer) return (i == k) ? trace.box.scale(k) : 0.0;
            return trace.layers[li - 1].grad[k](p, i);
        };
        auto prev_hess = [&](Index s, Index i) -> double {
            if (first_layer) return 0.0;
            return trace.layers[li - 1].hess[s](p, i);
        };

        for (Index j = 0; j < m; ++j) {
            const Index wrow = v.offset + j * v.m_prev;
            for (Index i = 0; i < v.m_prev; ++i) {
                double acc = ws.zbar[j] * prev_value(i);
                if (order >= 1)
                    for (Index k = 0; k < d; ++k) acc += ws.zgbar[k][j] * prev_grad(k, i);
                if (order >= 2)
                    for (Index s = 0; s < npairs; ++s) acc += ws.zhbar[s][j] * prev_hess(s, i);
                out[wrow + i] += acc;
            }
            out[v.offset + m * v.m_prev + j] += ws.zbar[j];
        }

        if (!first_layer) {
            ws.abar_next.noalias() = layer.w.transpose() * ws.zbar;
            ws.abar = ws.abar_next;
            if (order >= 1) {
                for (Index k = 0; k < d; ++k) {
                    ws.gbar_next[k].noalias() = layer.w.transpose() * ws.zgbar[k];
                    ws.gbar[k] = ws.gbar_next[k];
                }
            }
            if (order >= 2) {
                for (Index s = 0; s < npairs; ++s) {
                    ws.hbar_next[s].noalias() = layer.w.transpose() * ws.zhbar[s];
                    ws.hbar[s] = ws.hbar_next[s];
                }
            }
        }
    }
}

}  // namespace

Matrix param_jacobian_rows(const ForwardTrace& trace, const Vector& beta_frozen,
                           std::span<const LinearRow> rows) {
    require(beta_frozen.size() == trace.arch.last_hidden(), "frozen beta has wrong length");
    for (const auto& row : rows)
        require(row.coeffs.max_order() <= trace.order,
                "row requests derivative order beyond the trace order");

    const auto views = layer_views(trace.arch);
    const Index nh = trace.arch.hidden_param_count();
    Matrix j0 = Matrix::Zero(static_cast<Index>(rows.size()), nh);
    ReverseScratch ws;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        reverse_point(trace, views, beta_frozen, row.coeffs, row.point_a, 1.0, ws, j0.row(i));
        if (row.is_pair())
            reverse_point(trace, views, beta_frozen, row.coeffs, row.point_b, -1.0, ws, j0.row(i));
    }
    return j0;
}

Matrix param_jacobian_rows(const Architecture& arch, const Vector& theta, const Vector& beta_frozen,
                           const Matrix& points, const DomainBox& box,
                           std::span<const LinearRow> rows) {
    int order = 0;
    for (const auto& row : rows) order = std::max(order, row.coeffs.max_order());
    ForwardTrace trace = forward_trace(arch, theta, points, box, order);
    return param_jacobian_rows(trace, beta_frozen, rows);
}

void accumulate_row(RowRef out, const HiddenEval& he, Index point,
                    const DiffCoeffs& c, double sign) {
    require(c.max_order() <= he.order, "row requests derivative order beyond the evaluation order");
    apply_coeffs_row(out, he.psi, he.grad, he.hess, he.dim, point, c, sign);
}

void accumulate_row(RowRef out, const ForwardTrace& trace, Index point,
                    const DiffCoeffs& c, double sign) {
    require(c.max_order() <= trace.order,
            "row requests derivative order beyond the evaluation order");
    const auto& last = trace.layers.back();
    apply_coeffs_row(out, last.value, last.grad, last.hess, trace.box.dim(), point, c, sign);
}

}  // namespace varpro
