#!/usr/bin/env python3
# Copyright 2026 The decotune Authors
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

"""Stand-in workload for the command evaluator: reads {"knobs": {...}} on
stdin and prints {"tps": x, "lat": y}. Replace with a script that applies
the knobs to a real server and runs a benchmark."""
import json
import math
import sys

knobs = json.load(sys.stdin)["knobs"]
rpc = float(knobs.get("random_page_cost", 4.0))
buffers_gb = float(knobs.get("shared_buffers", 16384)) * 8 / 1024 / 1024
work_mem_mb = float(knobs.get("work_mem", 4096)) / 1024

quality = (math.exp(-((rpc - 1.3) / 2.0) ** 2)
           + math.exp(-((buffers_gb - 4.5) / 2.5) ** 2)
           + 0.5 * math.exp(-((math.log2(work_mem_mb + 1) - 6) / 2.5) ** 2))
print(json.dumps({"tps": 800 * (1 + 0.3 * quality), "lat": 0.08 / (1 + 0.2 * quality)}))
