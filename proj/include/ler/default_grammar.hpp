#pragma once

#include <string_view>

#include "ler/command.hpp"

namespace ler {

// Embedded copy of data/grammar/en.grammar (a test keeps the two identical).
inline constexpr std::string_view kDefaultGrammarText = R"grammar(# Default English steering vocabulary.
# One "phrase = TOKEN" per line. Phrases are matched exactly after trimming,
# collapsing whitespace and (unless disabled) folding case.
@case_insensitive = true
@locale = en

left = LEFT
pan left = LEFT
turn left = LEFT

right = RIGHT
pan right = RIGHT
turn right = RIGHT

up = UP
tilt up = UP
move up = UP

down = DOWN
tilt down = DOWN
move down = DOWN

in = IN
zoom in = IN
forward = IN

out = OUT
zoom out = OUT
back = OUT

stop = STOP
halt = STOP
freeze = STOP
# the pedal sends this line when pressed
pedal = STOP

step mode = STEP_MODE
step = STEP_MODE
discontinuous = STEP_MODE

continuous mode = CONTINUOUS_MODE
continuous = CONTINUOUS_MODE

manual on = MANUAL_ON
motors off = MANUAL_ON

manual off = MANUAL_OFF
motors on = MANUAL_OFF

reset = RESET
reset fault = RESET
)grammar";

inline const GrammarConfig& default_grammar() {
  static const GrammarConfig g = load_grammar(kDefaultGrammarText);
  return g;
}

}  // namespace ler
