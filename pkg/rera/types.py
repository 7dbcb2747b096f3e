Label = bool
LabelSet = frozenset[bool]
TraceLog = list[str]
ProgressState = dict[str, int]
BenchRow = dict[str, object]
Statistics = dict[str, int]
