from .funql import (COMPARATORS, FILTER_TAGS, NUMBERS, RESERVED, UNARY, And, Apply, ArgMax, ArgMin,
                    ArityError, Count, EntityLeaf, EntityRef, Filter, LFSyntaxError, LFTypeError,
                    LogicalForm, Number, Or, Signature, Value, children, depth, entities_of,
                    format_number, format_value, is_number_literal, iter_nodes, operator_tag,
                    parse_funql, print_funql, relations_of, result_type, type_check)
from .kb import (IntegrityError, KBError, KBParseError, KnowledgeBase, NonNumericComparison, Triple,
                 UnknownSymbol, dump_kb, execute, load_kb, parse_kb, save_kb)
