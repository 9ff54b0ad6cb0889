#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace viident {

using Index = Eigen::Index;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Structured mesh description.
///
/// 1D: the interval [left, right] split into n segments, Dirichlet condition
/// at the left end and a single friction point at the right end.
/// 2D: the unit square on an n x n grid, each cell cut into two triangles
/// along its (i,j)-(i+1,j+1) diagonal, friction on the bottom edge y = 0 and
/// Dirichlet conditions on the three other sides. The bottom corners belong
/// to the Dirichlet part.
struct MeshSpec {
    int dimension = 1;
    int n = 64;
    double left = 0.0;
    double right = 1.0;
};

/// Simplicial P1 mesh with the Dirichlet node set and the friction set D.
///
/// Degrees of freedom are the non-Dirichlet nodes; `dof_of_node` maps a node
/// to its dof index (or -1), `node_of_dof` is the inverse.
class Mesh {
public:
    Mesh(int dimension, std::vector<Point> nodes, std::vector<std::array<Index, 3>> elements,
         std::vector<Index> dirichlet_nodes, std::vector<Index> friction_nodes,
         std::vector<double> friction_weights);

    int dimension() const noexcept { return dimension_; }
    /// Vertices per element: 2 for segments, 3 for triangles.
    int element_size() const noexcept { return dimension_ + 1; }

    Index num_nodes() const noexcept { return static_cast<Index>(nodes_.size()); }
    Index num_elements() const noexcept { return static_cast<Index>(elements_.size()); }
    Index num_dofs() const noexcept { return static_cast<Index>(node_of_dof_.size()); }
    Index num_friction() const noexcept { return static_cast<Index>(friction_nodes_.size()); }

    const std::vector<Point>& nodes() const noexcept { return nodes_; }
    const std::vector<std::array<Index, 3>>& elements() const noexcept { return elements_; }
    const std::vector<Index>& dirichlet_nodes() const noexcept { return dirichlet_nodes_; }
    const std::vector<Index>& friction_nodes() const noexcept { return friction_nodes_; }
    const std::vector<double>& friction_weights() const noexcept { return friction_weights_; }

    Index dof_of_node(Index node) const { return dof_of_node_[static_cast<std::size_t>(node)]; }
    Index node_of_dof(Index dof) const { return node_of_dof_[static_cast<std::size_t>(dof)]; }
    /// Dof index of the i-th friction node.
    Index friction_dof(Index i) const { return friction_dofs_[static_cast<std::size_t>(i)]; }

    /// Length (1D) or area (2D) of element k.
    double element_measure(Index k) const;
    Point element_centroid(Index k) const;

    /// Nodal vector -> dof vector (drops Dirichlet entries).
    Eigen::VectorXd restrict_to_dofs(const Eigen::VectorXd& nodal) const;
    /// Dof vector -> nodal vector with zero Dirichlet entries.
    Eigen::VectorXd extend_to_nodes(const Eigen::VectorXd& dofs) const;

private:
    int dimension_;
    std::vector<Point> nodes_;
    std::vector<std::array<Index, 3>> elements_;
    std::vector<Index> dirichlet_nodes_;
    std::vector<Index> friction_nodes_;
    std::vector<double> friction_weights_;
    std::vector<Index> dof_of_node_;
    std::vector<Index> node_of_dof_;
    std::vector<Index> friction_dofs_;
};

/// Throws ConfigError for n < 1 (and n < 2 in 2D, which has no interior dof).
Mesh build_mesh(const MeshSpec& spec);

}  // namespace viident
