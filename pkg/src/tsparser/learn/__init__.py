from .distant import SkippedSentence, synth_distant, synth_sentence
from .evaluate import Report, beam_sweep, evaluate, f1
from .ranker import FEATURES, EmptyCandidates, Embeddings, Ranker, rank, ranker_features, ranker_step
from .supervised import (ForcedPass, OracleInadmissible, TrainConfig, loss_supervised, reinforce_grads,
                         teacher_force, train_supervised)
from .weak import WeakConfig, answer, is_consistent, train_weak, weak_step
