#include "support.hpp"

#include "k2t/experiment.hpp"

namespace k2t::test {

ToyWorldOptions small_world_options() {
  ToyWorldOptions o;
  o.train_sentences = 4000;
  o.eval_sentences = 4000;
  return o;
}

const ToyWorld& small_world() {
  static const ToyWorld world = build_toy_world(read_word_list(K2T_DATA_DIR "/common_words_1000.txt"),
                                                read_word_set(K2T_DATA_DIR "/stopwords.txt"), small_world_options());
  return world;
}

}  // namespace k2t::test
