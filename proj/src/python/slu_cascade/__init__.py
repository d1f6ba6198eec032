# Copyright 2026 The slu-cascade Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python bindings for the slu-cascade library."""

from ._slu import (
    BpeVocab,
    Cascade,
    SluError,
    Stream,
    beam_nbest_decode,
    ctc_loss,
    default_config_json,
    edit_distance,
    greedy_decode,
    wer,
)

__all__ = [
    "BpeVocab",
    "Cascade",
    "SluError",
    "Stream",
    "beam_nbest_decode",
    "ctc_loss",
    "default_config_json",
    "edit_distance",
    "greedy_decode",
    "wer",
]
