from .core import (AND, CONST, NOT, OR, XOR, Circuit, CircuitBudgetError, CircuitError, Gate,
                   as_bits, bits_to_int, bits_to_str, circuit_from_gates, eval_plain, int_to_bits,
                   parse_circuit, serialize_circuit)
from .builder import CircuitBuilder
from .generators import (SensitiveGraphConfig, gen_dijkstra_full, gen_dijkstra_sensitive,
                         gen_millionaires, gen_select)
