// Copyright 2026 The slu-cascade Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Default grammar and pronunciation lexicon for the synthetic corpus.

#include "slu/corpus.hpp"

#include <sstream>

#include "slu/error.hpp"

namespace slu {
namespace {

constexpr const char* kPhones =
    "aa ae ah ao aw ay b ch d dh eh er ey f g hh ih iy jh k l m n ng ow oy p r s sh t th "
    "uh uw v w y z zh";

// word: phones (ARPAbet, stress dropped). The first block covers the command
// grammar; the rest only appear in pre-training sentences.
constexpr const char* kLexicon = R"(
turn: t er n
on: ao n
the: dh ah
switch: s w ih ch
play: p l ey
put: p uh t
some: s ah m
off: ao f
stop: s t aa p
pause: p ao z
up: ah p
increase: ih n k r iy s
make: m ey k
it: ih t
louder: l aw d er
warmer: w ao r m er
is: ih z
very: v eh r iy
cold: k ow l d
down: d aw n
decrease: d ih k r iy s
quieter: k w ay ah t er
cooler: k uw l er
hot: hh aa t
bring: b r ih ng
me: m iy
my: m ay
go: g ow
get: g eh t
fetch: f eh ch
i: ay
need: n iy d
change: ch ey n jh
language: l ae ng g w ih jh
open: ow p ah n
settings: s eh t ih ng z
to: t uw
set: s eh t
in: ih n
kitchen: k ih ch ah n
bedroom: b eh d r uw m
washroom: w aa sh r uw m
lights: l ay t s
lamp: l ae m p
music: m y uw z ih k
volume: v aa l y uw m
heat: hh iy t
newspaper: n uw z p ey p er
juice: jh uw s
socks: s aa k s
shoes: sh uw z
chinese: ch ay n iy z
korean: k ao r iy ah n
english: ih ng g l ih sh
german: jh er m ah n
a: ah
and: ae n d
book: b uh k
house: hh aw s
water: w ao t er
table: t ey b ah l
window: w ih n d ow
door: d ao r
car: k aa r
city: s ih t iy
river: r ih v er
garden: g aa r d ah n
morning: m ao r n ih ng
evening: iy v n ih ng
night: n ay t
day: d ey
week: w iy k
year: y ih r
time: t ay m
people: p iy p ah l
child: ch ay l d
mother: m ah dh er
father: f aa dh er
friend: f r eh n d
teacher: t iy ch er
doctor: d aa k t er
story: s t ao r iy
letter: l eh t er
picture: p ih k ch er
money: m ah n iy
school: s k uw l
market: m aa r k ih t
street: s t r iy t
forest: f ao r ah s t
mountain: m aw n t ah n
ocean: ow sh ah n
winter: w ih n t er
summer: s ah m er
spring: s p r ih ng
green: g r iy n
blue: b l uw
red: r eh d
yellow: y eh l ow
black: b l ae k
white: w ay t
small: s m ao l
large: l aa r jh
happy: hh ae p iy
quick: k w ih k
slow: s l ow
early: er l iy
late: l ey t
old: ow l d
young: y ah ng
long: l ao ng
short: sh ao r t
good: g uh d
bad: b ae d
new: n uw
walk: w ao k
run: r ah n
read: r iy d
write: r ay t
speak: s p iy k
listen: l ih s ah n
think: th ih ng k
know: n ow
see: s iy
watch: w aa ch
find: f ay n d
give: g ih v
take: t ey k
keep: k iy p
leave: l iy v
call: k ao l
help: hh eh l p
work: w er k
sleep: s l iy p
eat: iy t
drink: d r ih ng k
cook: k uh k
clean: k l iy n
buy: b ay
sell: s eh l
travel: t r ae v ah l
learn: l er n
remember: r ih m eh m b er
begin: b ih g ih n
finish: f ih n ih sh
always: ao l w ey z
never: n eh v er
again: ah g eh n
together: t ah g eh dh er
outside: aw t s ay d
under: ah n d er
behind: b ih hh ay n d
near: n ih r
far: f aa r
with: w ih dh
from: f r ah m
about: ah b aw t
after: ae f t er
before: b ih f ao r
because: b ih k ah z
but: b ah t
or: ao r
we: w iy
they: dh ey
she: sh iy
he: hh iy
)";

}  // namespace

SlotGrammar SlotGrammar::default_grammar() {
  SlotGrammar g;
  g.actions = {"activate", "bring", "change language", "deactivate", "decrease", "increase"};
  g.objects = {"none",  "music",     "lights", "volume", "heat",    "lamp",    "newspaper",
               "juice", "socks",     "shoes",  "chinese", "korean", "english", "german"};
  g.locations = {"none", "kitchen", "bedroom", "washroom"};
  const std::vector<std::string> rooms = {"none", "kitchen", "bedroom", "washroom"};
  for (const char* lang : {"none", "chinese", "english", "german", "korean"})
    g.validity.push_back({"change language", lang, "none"});
  for (const char* act : {"activate", "deactivate"}) {
    g.validity.push_back({act, "lamp", "none"});
    for (const auto& r : rooms) g.validity.push_back({act, "lights", r});
    g.validity.push_back({act, "music", "none"});
  }
  for (const char* obj : {"juice", "newspaper", "shoes", "socks"})
    g.validity.push_back({"bring", obj, "none"});
  for (const char* act : {"decrease", "increase"}) {
    for (const auto& r : rooms) g.validity.push_back({act, "heat", r});
    g.validity.push_back({act, "volume", "none"});
  }

  auto add = [&g](const char* action, const char* pattern,
                  std::vector<std::string> objects = {}) {
    g.templates.push_back({action, pattern, std::move(objects)});
  };
  add("activate", "turn on the {object} {location}");
  add("activate", "switch on the {object} {location}");
  add("activate", "turn the {object} on {location}");
  add("activate", "{loc} {object} on");
  add("activate", "play the {object}", {"music"});
  add("activate", "put on some {object}", {"music"});
  add("deactivate", "turn off the {object} {location}");
  add("deactivate", "switch off the {object} {location}");
  add("deactivate", "turn the {object} off {location}");
  add("deactivate", "{loc} {object} off");
  add("deactivate", "stop the {object}", {"music"});
  add("deactivate", "pause the {object}", {"music"});
  add("increase", "turn up the {object} {location}");
  add("increase", "increase the {object} {location}");
  add("increase", "{loc} {object} up");
  add("increase", "make it louder", {"volume"});
  add("increase", "make it warmer {location}", {"heat"});
  add("increase", "it is very cold {location}", {"heat"});
  add("decrease", "turn down the {object} {location}");
  add("decrease", "decrease the {object} {location}");
  add("decrease", "{loc} {object} down");
  add("decrease", "make it quieter", {"volume"});
  add("decrease", "make it cooler {location}", {"heat"});
  add("decrease", "it is very hot {location}", {"heat"});
  add("bring", "bring me my {object}");
  add("bring", "go get my {object}");
  add("bring", "fetch the {object}");
  add("bring", "i need my {object}");
  add("change language", "change language");
  add("change language", "switch the language");
  add("change language", "open language settings");
  add("change language", "change the language to {object}");
  add("change language", "switch to {object}");
  add("change language", "set my language to {object}");
  return g;
}

Lexicon Lexicon::default_lexicon() {
  Lexicon lex;
  std::istringstream ps(kPhones);
  for (std::string p; ps >> p;) lex.phones.push_back(p);
  std::istringstream ls(kLexicon);
  for (std::string line; std::getline(ls, line);) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::vector<std::size_t> pron;
    std::istringstream rs(line.substr(colon + 1));
    for (std::string p; rs >> p;) pron.push_back(lex.phone_id(p));
    lex.words[line.substr(0, colon)].push_back(std::move(pron));
  }
  return lex;
}

}  // namespace slu
