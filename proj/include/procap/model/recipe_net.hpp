#pragma once

#include <span>
#include <utility>
#include <vector>

#include "procap/autodiff/lstm.hpp"
#include "procap/model/encoders.hpp"
#include "procap/model/model.hpp"

namespace procap::model {

// Recipe RNN state. `lstm.h` is the prediction for step `step_index + 1`.
template <class T>
struct RecipeState {
  ad::LstmState<T> lstm;
  std::size_t step_index = 0;

  StepRepr<T> prediction() const { return {lstm.h, Source::kPredicted}; }
};

// r0 = W_ing * ingredients + b (or the learned start vector when
// `no_ingredients`), then one recipe-LSTM step from a zero state.
template <class T>
std::pair<RecipeState<T>, StepRepr<T>> init_from_ingredients(ad::Graph<T>& g, const Model<T>& m,
                                                              std::span<const float> ingredients,
                                                              bool no_ingredients = false) {
  ad::Tensor<T> r0;
  if (no_ingredients) {
    r0 = g.param(m.start_vector());
  } else {
    if (ingredients.size() != m.config().ingredient_size) {
      throw ShapeError("init_from_ingredients: vector of length " + std::to_string(ingredients.size()) +
                       ", model expects " + std::to_string(m.config().ingredient_size));
    }
    auto ing = g.constant({ingredients.size()}, std::vector<T>(ingredients.begin(), ingredients.end()));
    r0 = ad::add(ad::matmul(g.param(m.ingredient_w()), ing), g.param(m.ingredient_b()));
  }
  RecipeState<T> s;
  s.lstm = ad::lstm_cell(r0, ad::lstm_zero_state(g, m.config().recipe_hidden), m.recipe_lstm());
  s.step_index = 0;
  return {s, StepRepr<T>{r0, Source::kIngredientInit}};
}

// Feeds one observed or predicted step representation.
template <class T>
RecipeState<T> advance(const RecipeState<T>& state, const StepRepr<T>& r, const Model<T>& m) {
  RecipeState<T> next;
  next.lstm = ad::lstm_cell(r.vector, state.lstm, m.recipe_lstm());
  next.step_index = state.step_index + 1;
  return next;
}

}  // namespace procap::model
