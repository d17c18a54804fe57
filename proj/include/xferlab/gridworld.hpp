#pragma once

#include <cstddef>
#include <deque>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "mdp.hpp"

namespace xferlab {

/// Plain-text gridworld. Glyphs: '#' wall, '.' floor, 'S' start, 'G' goal,
/// 'D' doorway (walkable floor, kept distinct for rendering). Exactly one S
/// and one G; the goal must be reachable from the start.
struct Grid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::string> rows;
    std::size_t start_r = 0, start_c = 0;
    std::size_t goal_r = 0, goal_c = 0;

    bool walkable(std::size_t r, std::size_t c) const { return rows[r][c] != '#'; }
};

inline Grid parse_grid(const std::string& text) {
    Grid g;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.eof()) break;
        g.rows.push_back(line);
    }
    while (!g.rows.empty() && g.rows.back().empty()) g.rows.pop_back();
    require(!g.rows.empty(), ErrorCode::GridInvalid, "empty grid");
    g.height = g.rows.size();
    g.width = g.rows[0].size();
    require(g.width > 0, ErrorCode::GridInvalid, "empty grid row");

    std::size_t n_start = 0, n_goal = 0;
    for (std::size_t r = 0; r < g.height; ++r) {
        require(g.rows[r].size() == g.width, ErrorCode::GridInvalid,
                "ragged grid: row " + std::to_string(r));
        for (std::size_t c = 0; c < g.width; ++c) {
            char ch = g.rows[r][c];
            switch (ch) {
                case '#':
                case '.':
                case 'D':
                    break;
                case 'S':
                    g.start_r = r;
                    g.start_c = c;
                    ++n_start;
                    break;
                case 'G':
                    g.goal_r = r;
                    g.goal_c = c;
                    ++n_goal;
                    break;
                default:
                    throw Error(ErrorCode::GridInvalid,
                                std::string("unknown glyph '") + ch + "' at row " +
                                    std::to_string(r) + " col " + std::to_string(c));
            }
        }
    }
    require(n_start == 1, ErrorCode::GridInvalid,
            "grid must contain exactly one S (found " + std::to_string(n_start) + ")");
    require(n_goal == 1, ErrorCode::GridInvalid,
            "grid must contain exactly one G (found " + std::to_string(n_goal) + ")");

    // Reachability check doubles as the BFS distance oracle below.
    std::vector<std::vector<std::size_t>> dist(
        g.height, std::vector<std::size_t>(g.width, std::numeric_limits<std::size_t>::max()));
    std::deque<std::pair<std::size_t, std::size_t>> queue;
    dist[g.start_r][g.start_c] = 0;
    queue.emplace_back(g.start_r, g.start_c);
    while (!queue.empty()) {
        auto [r, c] = queue.front();
        queue.pop_front();
        const int dr[4] = {-1, 0, 1, 0};
        const int dc[4] = {0, 1, 0, -1};
        for (int k = 0; k < 4; ++k) {
            long nr = long(r) + dr[k], nc = long(c) + dc[k];
            if (nr < 0 || nc < 0 || nr >= long(g.height) || nc >= long(g.width)) continue;
            if (!g.walkable(std::size_t(nr), std::size_t(nc))) continue;
            if (dist[std::size_t(nr)][std::size_t(nc)] != std::numeric_limits<std::size_t>::max())
                continue;
            dist[std::size_t(nr)][std::size_t(nc)] = dist[r][c] + 1;
            queue.emplace_back(std::size_t(nr), std::size_t(nc));
        }
    }
    require(dist[g.goal_r][g.goal_c] != std::numeric_limits<std::size_t>::max(),
            ErrorCode::GridUnreachable, "goal not reachable from start");
    return g;
}

/// BFS shortest-path length from S to G (grid guaranteed valid by parse_grid).
inline std::size_t grid_shortest_path(const Grid& g) {
    std::vector<std::vector<std::size_t>> dist(
        g.height, std::vector<std::size_t>(g.width, std::numeric_limits<std::size_t>::max()));
    std::deque<std::pair<std::size_t, std::size_t>> queue;
    dist[g.start_r][g.start_c] = 0;
    queue.emplace_back(g.start_r, g.start_c);
    while (!queue.empty()) {
        auto [r, c] = queue.front();
        queue.pop_front();
        if (r == g.goal_r && c == g.goal_c) return dist[r][c];
        const int dr[4] = {-1, 0, 1, 0};
        const int dc[4] = {0, 1, 0, -1};
        for (int k = 0; k < 4; ++k) {
            long nr = long(r) + dr[k], nc = long(c) + dc[k];
            if (nr < 0 || nc < 0 || nr >= long(g.height) || nc >= long(g.width)) continue;
            if (!g.walkable(std::size_t(nr), std::size_t(nc))) continue;
            if (dist[std::size_t(nr)][std::size_t(nc)] != std::numeric_limits<std::size_t>::max())
                continue;
            dist[std::size_t(nr)][std::size_t(nc)] = dist[r][c] + 1;
            queue.emplace_back(std::size_t(nr), std::size_t(nc));
        }
    }
    throw Error(ErrorCode::GridUnreachable, "goal not reachable from start");
}

/// States are walkable cells in row-major order; actions 0..3 are
/// up/right/down/left. Bumping a wall or the border leaves the state
/// unchanged. With slip s the move goes sideways with probability s/2 each.
struct GridMdpParams {
    double gamma = 0.95;
    double step_reward = -0.01;
    double goal_reward = 1.0;
    double slip = 0.0;
};

struct GridMdp {
    TabularMdp mdp;
    std::vector<std::pair<std::size_t, std::size_t>> cell_of_state;
    std::vector<std::vector<std::size_t>> state_of_cell;  // SIZE_MAX for walls
    std::size_t goal_state = 0;
};

inline GridMdp grid_to_mdp(const Grid& g, const GridMdpParams& pr) {
    require(pr.slip >= 0.0 && pr.slip <= 1.0, ErrorCode::Precondition, "slip must be in [0,1]");
    GridMdp out;
    out.state_of_cell.assign(g.height,
                             std::vector<std::size_t>(g.width, std::numeric_limits<std::size_t>::max()));
    for (std::size_t r = 0; r < g.height; ++r)
        for (std::size_t c = 0; c < g.width; ++c)
            if (g.walkable(r, c)) {
                out.state_of_cell[r][c] = out.cell_of_state.size();
                out.cell_of_state.emplace_back(r, c);
            }

    TabularMdp& m = out.mdp;
    m.n_states = out.cell_of_state.size();
    m.n_actions = 4;
    m.gamma = pr.gamma;
    m.start_state = out.state_of_cell[g.start_r][g.start_c];
    out.goal_state = out.state_of_cell[g.goal_r][g.goal_c];
    m.terminal.assign(m.n_states, false);
    m.terminal[out.goal_state] = true;
    m.p.assign(m.n_states,
               std::vector<std::vector<double>>(m.n_actions, std::vector<double>(m.n_states, 0.0)));
    m.r.assign(m.n_states, std::vector<double>(m.n_actions, 0.0));

    const int dr[4] = {-1, 0, 1, 0};
    const int dc[4] = {0, 1, 0, -1};
    auto move_target = [&](std::size_t s, int dir) {
        auto [r, c] = out.cell_of_state[s];
        long nr = long(r) + dr[dir], nc = long(c) + dc[dir];
        if (nr < 0 || nc < 0 || nr >= long(g.height) || nc >= long(g.width)) return s;
        if (!g.walkable(std::size_t(nr), std::size_t(nc))) return s;
        return out.state_of_cell[std::size_t(nr)][std::size_t(nc)];
    };

    for (std::size_t s = 0; s < m.n_states; ++s) {
        if (m.terminal[s]) {
            for (std::size_t a = 0; a < 4; ++a) m.p[s][a][s] = 1.0;  // absorbing
            continue;
        }
        for (int a = 0; a < 4; ++a) {
            // intended direction plus the two perpendicular slips
            std::size_t fwd = move_target(s, a);
            std::size_t left = move_target(s, (a + 3) % 4);
            std::size_t right = move_target(s, (a + 1) % 4);
            m.p[s][std::size_t(a)][fwd] += 1.0 - pr.slip;
            m.p[s][std::size_t(a)][left] += pr.slip / 2.0;
            m.p[s][std::size_t(a)][right] += pr.slip / 2.0;
            m.r[s][std::size_t(a)] =
                pr.step_reward + pr.goal_reward * m.p[s][std::size_t(a)][out.goal_state];
        }
    }
    m.validate();
    return out;
}

/// Carry a Q-table from one layout to another by grid coordinates: cells
/// walkable in both keep their values, cells new to the target start at zero.
/// This is the warm-start operator for layout variants, where moving a
/// doorway shifts the row-major state indexing.
inline QTable remap_q_by_cell(const GridMdp& from, const QTable& q_from, const GridMdp& to) {
    require(q_from.size() == from.mdp.n_states, ErrorCode::ShapeMismatch,
            "q table does not match the source layout");
    QTable q(to.mdp.n_states, std::vector<double>(to.mdp.n_actions, 0.0));
    for (std::size_t s = 0; s < to.mdp.n_states; ++s) {
        auto [r, c] = to.cell_of_state[s];
        if (r < from.state_of_cell.size() && c < from.state_of_cell[r].size()) {
            std::size_t fs = from.state_of_cell[r][c];
            if (fs != std::numeric_limits<std::size_t>::max()) q[s] = q_from[fs];
        }
    }
    return q;
}

}  // namespace xferlab
