#include "bisimlab/transport.hpp"

#include "bisimlab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bisim {

namespace {

constexpr double kPivotTol = 1e-12;

struct Cell {
    int i, j;
    double flow;
};

void validate_distribution(const std::vector<double>& w, const char* name) {
    if (w.empty()) throw std::invalid_argument(std::string(name) + " has empty support");
    double sum = 0.0;
    for (double x : w) {
        if (!std::isfinite(x) || x < 0.0)
            throw std::invalid_argument(std::string(name) + " has a negative or non-finite weight");
        sum += x;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
        throw std::invalid_argument(std::string(name) + " does not sum to 1");
}

// Simplex state on the compressed m x n problem. The basis always holds
// exactly m+n-1 cells forming a spanning tree of the bipartite row/col graph.
struct Simplex {
    int m, n;
    const std::vector<double>& cost;  // m x n
    std::vector<Cell> basis;
    std::vector<int> basis_of;  // cell index -> position in basis, -1 if nonbasic

    Simplex(int m_, int n_, const std::vector<double>& cost_, const std::vector<double>& a,
            const std::vector<double>& b)
        : m(m_), n(n_), cost(cost_), basis_of(static_cast<size_t>(m_) * n_, -1) {
        northwest_corner(a, b);
    }

    void northwest_corner(std::vector<double> a, std::vector<double> b) {
        int i = 0, j = 0;
        while (true) {
            double f = std::min(a[i], b[j]);
            add_basic(i, j, f);
            a[i] -= f;
            b[j] -= f;
            if (i == m - 1 && j == n - 1) break;
            if (i == m - 1) ++j;
            else if (j == n - 1) ++i;
            else if (a[i] <= b[j]) ++i;
            else ++j;
        }
    }

    void add_basic(int i, int j, double f) {
        basis_of[static_cast<size_t>(i) * n + j] = static_cast<int>(basis.size());
        basis.push_back({i, j, f});
    }

    // Potentials u, v with u[i] + v[j] = cost[i][j] on basic cells. The basis
    // tree makes them unique up to u[0] = 0.
    void potentials(std::vector<double>& u, std::vector<double>& v) const {
        u.assign(m, std::numeric_limits<double>::quiet_NaN());
        v.assign(n, std::numeric_limits<double>::quiet_NaN());
        u[0] = 0.0;
        // adjacency over basic cells
        std::vector<std::vector<int>> row_cells(m), col_cells(n);
        for (int k = 0; k < static_cast<int>(basis.size()); ++k) {
            row_cells[basis[k].i].push_back(k);
            col_cells[basis[k].j].push_back(k);
        }
        std::vector<int> stack = {0};  // row nodes 0..m-1, col nodes m..m+n-1
        while (!stack.empty()) {
            int node = stack.back();
            stack.pop_back();
            if (node < m) {
                for (int k : row_cells[node]) {
                    int j = basis[k].j;
                    if (std::isnan(v[j])) {
                        v[j] = cost[static_cast<size_t>(node) * n + j] - u[node];
                        stack.push_back(m + j);
                    }
                }
            } else {
                int j = node - m;
                for (int k : col_cells[j]) {
                    int i = basis[k].i;
                    if (std::isnan(u[i])) {
                        u[i] = cost[static_cast<size_t>(i) * n + j] - v[j];
                        stack.push_back(i);
                    }
                }
            }
        }
    }

    // Bland: first cell in row-major order with reduced cost < -kPivotTol.
    int entering(const std::vector<double>& u, const std::vector<double>& v) const {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                if (basis_of[static_cast<size_t>(i) * n + j] >= 0) continue;
                if (cost[static_cast<size_t>(i) * n + j] - u[i] - v[j] < -kPivotTol)
                    return i * n + j;
            }
        }
        return -1;
    }

    // Unique cycle closed by the entering cell: path through the basis tree
    // from its row node to its column node, signs alternating from '+'.
    void pivot(int enter_cell) {
        int ei = enter_cell / n, ej = enter_cell % n;

        int nodes = m + n;
        std::vector<int> parent_node(nodes, -1), parent_cell(nodes, -1);
        std::vector<char> seen(nodes, 0);
        std::vector<std::vector<int>> row_cells(m), col_cells(n);
        for (int k = 0; k < static_cast<int>(basis.size()); ++k) {
            row_cells[basis[k].i].push_back(k);
            col_cells[basis[k].j].push_back(k);
        }
        std::vector<int> stack = {ei};
        seen[ei] = 1;
        while (!stack.empty()) {
            int node = stack.back();
            stack.pop_back();
            if (node == m + ej) break;
            const auto& cells = node < m ? row_cells[node] : col_cells[node - m];
            for (int k : cells) {
                int next = node < m ? m + basis[k].j : basis[k].i;
                if (!seen[next]) {
                    seen[next] = 1;
                    parent_node[next] = node;
                    parent_cell[next] = k;
                    stack.push_back(next);
                }
            }
        }

        // walk back from the column node; cells along the path alternate signs,
        // the entering cell itself is '+'
        std::vector<int> path;  // basis indices from col node back to row node
        for (int node = m + ej; node != ei; node = parent_node[node]) path.push_back(parent_cell[node]);

        std::vector<int> minus, plus;
        for (int t = 0; t < static_cast<int>(path.size()); ++t) {
            // path[0] is adjacent to the entering '-'; signs alternate outward
            (t % 2 == 0 ? minus : plus).push_back(path[t]);
        }

        // deterministic leaving choice: min flow, ties by smallest cell index
        double theta = std::numeric_limits<double>::infinity();
        for (int k : minus) theta = std::min(theta, basis[k].flow);
        int leave = -1;
        for (int k : minus) {
            if (basis[k].flow > theta) continue;
            if (leave < 0 || basis[k].i * n + basis[k].j < basis[leave].i * n + basis[leave].j) leave = k;
        }

        for (int k : minus) basis[k].flow -= theta;
        for (int k : plus) basis[k].flow += theta;
        basis[leave].flow = 0.0;

        // swap leaving cell for the entering one, keeping basis size m+n-1
        basis_of[static_cast<size_t>(basis[leave].i) * n + basis[leave].j] = -1;
        basis[leave] = {ei, ej, theta};
        basis_of[static_cast<size_t>(ei) * n + ej] = leave;
    }

    void solve() {
        const int max_pivots = 10000 * (m + n);
        std::vector<double> u, v;
        for (int iter = 0; iter < max_pivots; ++iter) {
            potentials(u, v);
            int enter = entering(u, v);
            if (enter < 0) return;
            pivot(enter);
        }
        throw std::runtime_error("wasserstein1: pivot limit exceeded");
    }
};

}  // namespace

TransportPlan wasserstein1(const std::vector<double>& mu, const std::vector<double>& nu,
                           const std::vector<double>& cost) {
    validate_distribution(mu, "mu");
    validate_distribution(nu, "nu");
    const int M = static_cast<int>(mu.size());
    const int N = static_cast<int>(nu.size());
    if (cost.size() != static_cast<size_t>(M) * N)
        throw std::invalid_argument("wasserstein1: cost dimensions do not match supports");
    for (double c : cost) {
        if (!std::isfinite(c) || c < 0.0)
            throw std::invalid_argument("wasserstein1: cost entries must be nonnegative and finite");
    }

    // compress away zero-weight atoms
    std::vector<int> rows, cols;
    for (int i = 0; i < M; ++i)
        if (mu[i] > 0.0) rows.push_back(i);
    for (int j = 0; j < N; ++j)
        if (nu[j] > 0.0) cols.push_back(j);
    const int m = static_cast<int>(rows.size());
    const int n = static_cast<int>(cols.size());

    std::vector<double> a(m), b(n), c(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i) a[i] = mu[rows[i]];
    for (int j = 0; j < n; ++j) b[j] = nu[cols[j]];
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            c[static_cast<size_t>(i) * n + j] = cost[static_cast<size_t>(rows[i]) * N + cols[j]];

    Simplex simplex(m, n, c, a, b);
    simplex.solve();

    TransportPlan plan;
    plan.n_rows = M;
    plan.n_cols = N;
    plan.coupling.assign(static_cast<size_t>(M) * N, 0.0);
    double value = 0.0;
    for (const Cell& cell : simplex.basis) {
        if (cell.flow == 0.0) continue;
        int i = rows[cell.i], j = cols[cell.j];
        plan.coupling[static_cast<size_t>(i) * N + j] = cell.flow;
        value += cell.flow * cost[static_cast<size_t>(i) * N + j];
    }
    plan.value = value;
    return plan;
}

}  // namespace bisim
