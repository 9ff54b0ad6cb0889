#include "viident/mesh.hpp"

#include "viident/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace viident {

Mesh::Mesh(int dimension, std::vector<Point> nodes, std::vector<std::array<Index, 3>> elements,
           std::vector<Index> dirichlet_nodes, std::vector<Index> friction_nodes,
           std::vector<double> friction_weights)
    : dimension_(dimension),
      nodes_(std::move(nodes)),
      elements_(std::move(elements)),
      dirichlet_nodes_(std::move(dirichlet_nodes)),
      friction_nodes_(std::move(friction_nodes)),
      friction_weights_(std::move(friction_weights)) {
    if (dimension_ != 1 && dimension_ != 2) {
        throw ConfigError("mesh dimension must be 1 or 2");
    }
    if (friction_nodes_.size() != friction_weights_.size()) {
        throw ConfigError("friction nodes and friction weights differ in length");
    }
    const Index nn = num_nodes();
    auto valid = [nn](Index i) { return i >= 0 && i < nn; };
    for (Index k = 0; k < num_elements(); ++k) {
        for (int a = 0; a < element_size(); ++a) {
            if (!valid(elements_[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)])) {
                throw ConfigError("element " + std::to_string(k) + " has an invalid node index");
            }
        }
        if (!(element_measure(k) > 0.0)) {
            throw ConfigError("element " + std::to_string(k) + " has non-positive measure");
        }
    }

    std::vector<bool> fixed(static_cast<std::size_t>(nn), false);
    for (Index d : dirichlet_nodes_) {
        if (!valid(d)) throw ConfigError("invalid Dirichlet node index");
        fixed[static_cast<std::size_t>(d)] = true;
    }
    dof_of_node_.assign(static_cast<std::size_t>(nn), -1);
    for (Index i = 0; i < nn; ++i) {
        if (!fixed[static_cast<std::size_t>(i)]) {
            dof_of_node_[static_cast<std::size_t>(i)] = static_cast<Index>(node_of_dof_.size());
            node_of_dof_.push_back(i);
        }
    }
    for (std::size_t i = 0; i < friction_nodes_.size(); ++i) {
        const Index node = friction_nodes_[i];
        if (!valid(node)) throw ConfigError("invalid friction node index");
        if (dof_of_node_[static_cast<std::size_t>(node)] < 0) {
            throw ConfigError("friction node " + std::to_string(node) + " is also a Dirichlet node");
        }
        if (!(friction_weights_[i] > 0.0)) {
            throw ConfigError("friction quadrature weights must be positive");
        }
        friction_dofs_.push_back(dof_of_node_[static_cast<std::size_t>(node)]);
    }
}

double Mesh::element_measure(Index k) const {
    const auto& el = elements_[static_cast<std::size_t>(k)];
    const Point& a = nodes_[static_cast<std::size_t>(el[0])];
    const Point& b = nodes_[static_cast<std::size_t>(el[1])];
    if (dimension_ == 1) {
        return b.x - a.x;
    }
    const Point& c = nodes_[static_cast<std::size_t>(el[2])];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Point Mesh::element_centroid(Index k) const {
    const auto& el = elements_[static_cast<std::size_t>(k)];
    Point c;
    for (int a = 0; a < element_size(); ++a) {
        const Point& p = nodes_[static_cast<std::size_t>(el[static_cast<std::size_t>(a)])];
        c.x += p.x;
        c.y += p.y;
    }
    c.x /= element_size();
    c.y /= element_size();
    return c;
}

Eigen::VectorXd Mesh::restrict_to_dofs(const Eigen::VectorXd& nodal) const {
    if (nodal.size() != num_nodes()) {
        throw DomainError("nodal vector has length " + std::to_string(nodal.size()) +
                          ", mesh has " + std::to_string(num_nodes()) + " nodes");
    }
    Eigen::VectorXd out(num_dofs());
    for (Index d = 0; d < num_dofs(); ++d) out[d] = nodal[node_of_dof(d)];
    return out;
}

Eigen::VectorXd Mesh::extend_to_nodes(const Eigen::VectorXd& dofs) const {
    if (dofs.size() != num_dofs()) {
        throw DomainError("dof vector has length " + std::to_string(dofs.size()) + ", mesh has " +
                          std::to_string(num_dofs()) + " dofs");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(num_nodes());
    for (Index d = 0; d < num_dofs(); ++d) out[node_of_dof(d)] = dofs[d];
    return out;
}

Mesh build_mesh(const MeshSpec& spec) {
    if (spec.n < 1) {
        throw ConfigError("mesh.n must be at least 1 (got " + std::to_string(spec.n) + ")");
    }
    const Index n = spec.n;
    if (spec.dimension == 1) {
        if (!(spec.right > spec.left)) {
            throw ConfigError("mesh.interval must satisfy left < right");
        }
        std::vector<Point> nodes;
        std::vector<std::array<Index, 3>> elements;
        const double h = (spec.right - spec.left) / static_cast<double>(n);
        for (Index i = 0; i <= n; ++i) {
            // Pin the last node so the interval end is exact.
            nodes.push_back({i == n ? spec.right : spec.left + static_cast<double>(i) * h, 0.0});
        }
        for (Index k = 0; k < n; ++k) elements.push_back({k, k + 1, -1});
        return Mesh(1, std::move(nodes), std::move(elements), {0}, {n}, {1.0});
    }
    if (spec.dimension == 2) {
        if (spec.n < 2) {
            throw ConfigError("2D mesh needs n >= 2 to have interior unknowns");
        }
        const double h = 1.0 / static_cast<double>(n);
        auto id = [n](Index i, Index j) { return j * (n + 1) + i; };
        std::vector<Point> nodes;
        for (Index j = 0; j <= n; ++j) {
            for (Index i = 0; i <= n; ++i) {
                nodes.push_back({static_cast<double>(i) * h, static_cast<double>(j) * h});
            }
        }
        std::vector<std::array<Index, 3>> elements;
        for (Index j = 0; j < n; ++j) {
            for (Index i = 0; i < n; ++i) {
                elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
                elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
            }
        }
        std::vector<Index> dirichlet;
        for (Index j = 0; j <= n; ++j) {
            for (Index i = 0; i <= n; ++i) {
                const bool boundary = i == 0 || i == n || j == n;
                if (boundary) dirichlet.push_back(id(i, j));
            }
        }
        std::vector<Index> friction;
        std::vector<double> weights;
        for (Index i = 1; i < n; ++i) {
            friction.push_back(id(i, 0));
            weights.push_back(h);  // lumped edge mass: h/2 from each neighbouring edge
        }
        return Mesh(2, std::move(nodes), std::move(elements), std::move(dirichlet),
                    std::move(friction), std::move(weights));
    }
    throw ConfigError("mesh.dimension must be 1 or 2");
}

}  // namespace viident
