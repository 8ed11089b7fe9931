#ifndef COALA_ENV_CLEANUP_ENV_HPP_
#define COALA_ENV_CLEANUP_ENV_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "coala/env/env.hpp"
#include "coala/util/errors.hpp"
#include "coala/util/rng.hpp"

namespace coala::env {

struct CleanupConfig {
  int rows = 5;
  int cols = 4;
  double p_pollution = 0.35;
  double apple_threshold = 3.0;  // P_threshold in p_apple = 1 - min(1, P/thr)
  double p_zap = 0.9;
  int t_zap = 5;
  int zap_range = 2;  // Chebyshev distance
  double r_apple = 1.0;
  int episode_length = 64;
  int initial_dirt = 3;
};

// Two-player CleanUp-lite grid world. Column 0 is the orchard (apples),
// the last column is the river (dirt); middle columns are plain walkable
// cells. Events within a step follow a fixed order: dirt spawn, apple
// spawn, harvest, clean, zap, movement; freeze timers tick at the end.
class CleanupEnv {
 public:
  static constexpr int kActions = 6;
  enum Action { kRight = 0, kLeft = 1, kUp = 2, kDown = 3, kZap = 4, kNoop = 5 };
  enum Cell { kEmpty = 0, kApple = 1, kDirt = 2 };

  // Per-step event counters, refreshed by each step() call.
  struct Events {
    std::array<int, 2> harvested{0, 0};
    std::array<int, 2> cleaned{0, 0};
    std::array<int, 2> zap_attempts{0, 0};
    std::array<int, 2> zap_successes{0, 0};  // index = zapping agent
    std::array<bool, 2> frozen{false, false};
  };

  explicit CleanupEnv(const CleanupConfig& cfg = CleanupConfig{}) : cfg_(cfg) {
    if (cfg.rows < 1 || cfg.cols < 2)
      throw ConfigError("CleanupEnv: grid too small");
    if (cfg.initial_dirt > cfg.rows)
      throw ConfigError("CleanupEnv: more initial dirt than river cells");
  }

  int obs_dim() const {
    return 2 * num_cells() + 3 * num_cells() + 2;  // positions, cells, flags
  }
  int num_actions() const { return kActions; }
  int episode_length() const { return cfg_.episode_length; }
  const CleanupConfig& config() const { return cfg_; }

  std::array<std::vector<float>, 2> reset(Rng& rng) {
    grid_.assign(num_cells(), kEmpty);
    // Exactly initial_dirt dirt patches on distinct river cells.
    std::vector<int> river_rows(cfg_.rows);
    for (int r = 0; r < cfg_.rows; ++r) river_rows[r] = r;
    for (int placed = 0; placed < cfg_.initial_dirt; ++placed) {
      const int pick =
          placed + static_cast<int>(rng.below(river_rows.size() - placed));
      std::swap(river_rows[placed], river_rows[pick]);
      grid_[cell_index(river_rows[placed], river_col())] = kDirt;
    }
    for (int a = 0; a < 2; ++a) {
      pos_[a] = static_cast<int>(rng.below(num_cells()));
      timer_[a] = 0;
    }
    t_ = 0;
    events_ = Events{};
    return {observe(0), observe(1)};
  }

  StepResult step(int a1, int a2, Rng& rng) {
    const std::array<int, 2> actions{a1, a2};
    for (int a : actions)
      if (a < 0 || a >= kActions) throw UsageError("CleanupEnv: bad action");
    events_ = Events{};
    StepResult result;

    // 1. Dirt spawn.
    {
      std::vector<int> free = free_rows_in_col(river_col());
      if (!free.empty() && rng.bernoulli(cfg_.p_pollution)) {
        const int row = free[rng.below(free.size())];
        grid_[cell_index(row, river_col())] = kDirt;
      }
    }
    // 2. Apple spawn, rate melts with pollution.
    {
      std::vector<int> free = free_rows_in_col(orchard_col());
      const double p_apple =
          1.0 - std::min(1.0, dirt_count() / cfg_.apple_threshold);
      if (!free.empty() && rng.bernoulli(p_apple)) {
        const int row = free[rng.below(free.size())];
        grid_[cell_index(row, orchard_col())] = kApple;
      }
    }
    // 3. Harvest (agent-index order when sharing a cell).
    for (int a = 0; a < 2; ++a) {
      if (timer_[a] > 0) continue;
      if (grid_[pos_[a]] == kApple) {
        grid_[pos_[a]] = kEmpty;
        result.rewards[a] += cfg_.r_apple;
        ++events_.harvested[a];
        ++total_harvested_[a];
      }
    }
    // 4. Clean.
    for (int a = 0; a < 2; ++a) {
      if (timer_[a] > 0) continue;
      if (grid_[pos_[a]] == kDirt) {
        grid_[pos_[a]] = kEmpty;
        ++events_.cleaned[a];
        ++total_cleaned_[a];
      }
    }
    // 5. Zap, resolved in agent-index order with independent draws. A
    // freshly frozen agent loses its own zap.
    std::array<bool, 2> freshly_frozen{false, false};
    for (int a = 0; a < 2; ++a) {
      if (actions[a] != kZap) continue;
      if (timer_[a] > 0 || freshly_frozen[a]) continue;
      ++events_.zap_attempts[a];
      const int opp = 1 - a;
      if (timer_[opp] > 0 || freshly_frozen[opp]) continue;  // no stacking
      if (chebyshev(pos_[a], pos_[opp]) > cfg_.zap_range) continue;
      if (rng.bernoulli(cfg_.p_zap)) {
        freshly_frozen[opp] = true;
        ++events_.zap_successes[a];
        ++total_zaps_[a];
      }
    }
    // 6. Movement (frozen agents stay put; off-grid moves are no-ops;
    // shared cells are allowed).
    for (int a = 0; a < 2; ++a) {
      if (timer_[a] > 0 || freshly_frozen[a]) continue;
      int row = pos_[a] / cfg_.cols;
      int col = pos_[a] % cfg_.cols;
      switch (actions[a]) {
        case kRight: col = std::min(col + 1, cfg_.cols - 1); break;
        case kLeft: col = std::max(col - 1, 0); break;
        case kUp: row = std::max(row - 1, 0); break;
        case kDown: row = std::min(row + 1, cfg_.rows - 1); break;
        default: break;
      }
      pos_[a] = cell_index(row, col);
    }
    // Timers tick once per step; a fresh freeze starts at t_zap.
    for (int a = 0; a < 2; ++a) {
      if (freshly_frozen[a])
        timer_[a] = cfg_.t_zap;
      else if (timer_[a] > 0)
        --timer_[a];
      events_.frozen[a] = timer_[a] > 0;
    }

    ++t_;
    result.observations[0] = observe(0);
    result.observations[1] = observe(1);
    result.done = t_ >= cfg_.episode_length;
    return result;
  }

  const Events& last_events() const { return events_; }
  int dirt_count() const {
    int n = 0;
    for (int c : grid_)
      if (c == kDirt) ++n;
    return n;
  }
  int apple_count() const {
    int n = 0;
    for (int c : grid_)
      if (c == kApple) ++n;
    return n;
  }
  int freeze_timer(int agent) const { return timer_[agent]; }
  int position(int agent) const { return pos_[agent]; }
  const std::array<long, 2>& total_harvested() const { return total_harvested_; }
  const std::array<long, 2>& total_cleaned() const { return total_cleaned_; }
  const std::array<long, 2>& total_zaps() const { return total_zaps_; }

 private:
  int num_cells() const { return cfg_.rows * cfg_.cols; }
  int orchard_col() const { return 0; }
  int river_col() const { return cfg_.cols - 1; }
  int cell_index(int row, int col) const { return row * cfg_.cols + col; }
  int chebyshev(int a, int b) const {
    const int dr = std::abs(a / cfg_.cols - b / cfg_.cols);
    const int dc = std::abs(a % cfg_.cols - b % cfg_.cols);
    return std::max(dr, dc);
  }
  std::vector<int> free_rows_in_col(int col) const {
    std::vector<int> rows;
    for (int r = 0; r < cfg_.rows; ++r)
      if (grid_[cell_index(r, col)] == kEmpty) rows.push_back(r);
    return rows;
  }

  // Own position block, other position block, cell one-hots, freeze flags
  // (own first): full information, symmetric between the agents.
  std::vector<float> observe(int agent) const {
    std::vector<float> obs;
    obs.reserve(obs_dim());
    const int opp = 1 - agent;
    for (int who : {agent, opp}) {
      for (int c = 0; c < num_cells(); ++c)
        obs.push_back(c == pos_[who] ? 1.0f : 0.0f);
    }
    for (int c = 0; c < num_cells(); ++c)
      for (int kind = 0; kind < 3; ++kind)
        obs.push_back(grid_[c] == kind ? 1.0f : 0.0f);
    obs.push_back(timer_[agent] > 0 ? 1.0f : 0.0f);
    obs.push_back(timer_[opp] > 0 ? 1.0f : 0.0f);
    return obs;
  }

  CleanupConfig cfg_;
  std::vector<int> grid_;
  std::array<int, 2> pos_{0, 0};
  std::array<int, 2> timer_{0, 0};
  int t_ = 0;
  Events events_{};
  std::array<long, 2> total_harvested_{0, 0};
  std::array<long, 2> total_cleaned_{0, 0};
  std::array<long, 2> total_zaps_{0, 0};
};

}  // namespace coala::env

#endif  // COALA_ENV_CLEANUP_ENV_HPP_
