#include "mrcp/error.hpp"
#include "mrcp/nn/train.hpp"
#include "mrcp/parallel.hpp"

#include <algorithm>

namespace mrcp::nn {

namespace {

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

double cross_validated_accuracy(const CnnSpec& spec, const EpochSet& data, const TrainConfig& cfg, int folds) {
  const auto plan = make_split_plan(data.labels, cfg.seed, {0.0, 1, folds});
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t f = 0; f < plan.n_folds(); ++f) {
    const auto fit = plan.fold_training(0, f);
    const auto& test = plan.fold_assignments[0][f];
    TrainConfig c = cfg;
    c.seed = splitmix64(cfg.seed + f);
    const auto model = train_cnn(spec, data.subset(fit), c).model;
    const auto pred = model.predict(data.subset(test));
    for (std::size_t i = 0; i < test.size(); ++i) correct += pred[i] == data.labels[test[i]] ? 1 : 0;
    total += test.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

GridResult grid_search(const GridRanges& ranges, const std::vector<EpochSet>& datasets, const TrainConfig& cfg,
                       int folds) {
  const auto kernels = sorted_unique(ranges.temporal_kernel);
  const auto depths = sorted_unique(ranges.depth);
  const auto pools = sorted_unique(ranges.pool_kernel);
  const auto units = sorted_unique(ranges.fc1_units);
  if (kernels.empty() || depths.empty() || pools.empty() || units.empty()) {
    raise(ErrorKind::InvalidConfig, "every grid-search range needs at least one candidate");
  }
  if (datasets.empty()) raise(ErrorKind::EmptyInput, "grid search needs at least one participant");

  std::vector<CnnSpec> combos;
  for (auto k : kernels) {
    for (auto d : depths) {
      for (auto p : pools) {
        for (auto u : units) {
          CnnSpec s;
          s.temporal_kernel = k;
          s.depth = d;
          s.pool_kernel = p;
          s.fc1_units = u;
          combos.push_back(s);
        }
      }
    }
  }

  GridResult result;
  result.cells.resize(datasets.size() * combos.size());
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& data = datasets[i / combos.size()];
    auto& cell = result.cells[i];
    cell.participant = i / combos.size();
    cell.spec = combos[i % combos.size()];
    cell.spec.spatial_kernel = data.n_channels();
    cell.spec.n_samples = data.n_samples();
    cell.spec.n_classes = data.n_classes();
  }

  parallel_for(result.cells.size(), [&](std::size_t i) {
    auto& cell = result.cells[i];
    TrainConfig c = cfg;
    c.seed = splitmix64(cfg.seed ^ splitmix64(i));
    try {
      cell.accuracy = cross_validated_accuracy(cell.spec, datasets[cell.participant], c, folds);
    } catch (const Error&) {
      cell.accuracy = 0.0;
      cell.failed = true;
    }
  });

  std::vector<std::size_t> vk, vd, vp, vu;
  for (std::size_t p = 0; p < datasets.size(); ++p) {
    const GridCell* best = nullptr;
    for (std::size_t j = 0; j < combos.size(); ++j) {
      const auto& cell = result.cells[p * combos.size() + j];
      if (best == nullptr || cell.accuracy > best->accuracy) best = &cell;
    }
    result.winners.push_back(best->spec);
    vk.push_back(best->spec.temporal_kernel);
    vd.push_back(best->spec.depth);
    vp.push_back(best->spec.pool_kernel);
    vu.push_back(best->spec.fc1_units);
  }
  result.spec = result.winners.front();
  result.spec.temporal_kernel = majority_vote(vk);
  result.spec.depth = majority_vote(vd);
  result.spec.pool_kernel = majority_vote(vp);
  result.spec.fc1_units = majority_vote(vu);
  return result;
}

}  // namespace mrcp::nn
