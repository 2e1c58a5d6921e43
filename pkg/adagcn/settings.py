import os


""" Adam step size for every base GCN. """
LEARNING_RATE = 0.01


# Full-batch epochs per base classifier. Single-GCN baselines are usually
# given 500.
EPOCHS = 100


L2_LAMBDA = 5e-4


HIDDEN_DIM = 16


DROPOUT_RATE = 0.0


# Return the snapshot with the best validation accuracy instead of the final
# epoch's params. Ties go to the earliest epoch.
BEST_EPOCH_SELECTION = True


LOSS_KIND = 'weighted_ce'


FOCAL_GAMMA = 2.0


CB_BETA = 0.999


""" Number of boosted GCNs (M). """
NUM_ESTIMATORS = 5


# The factor a of the sample-weight update. At 1.0 the update is plain
# SAMME.R.
SHRINKAGE = 1.0


# Warm start round m+1 from round m's params. Adam state is always reset.
TRANSFER_LEARNING = True


# Sum alpha-scaled member scores at prediction time instead of the plain
# SAMME.R sum. Off by default.
USE_ALPHA_IN_PREDICTION = False


# Renormalization trick: normalize A + I instead of A.
ADD_SELF_LOOPS = True


ROW_NORMALIZE = True


N_MAJORITY = 30


N_MINORITY = 10


VAL_SIZE = 500


TEST_SIZE = 1000


SEEDS = tuple(range(10))


# Named hyperparameter sets. 'citation' covers Cora, Citeseer and Pubmed;
# 'nell' is for the knowledge-graph scale dataset.
PRESETS = {
    'citation': {'l2_lambda': 5e-4, 'hidden_dim': 16},
    'nell': {'l2_lambda': 1e-5, 'hidden_dim': 128},
}


# Where train, evaluate, sweep and gen-fixture write when no --out is given.
# This is the one value that may come from the environment.
OUTPUT_DIR = os.environ.get('ADAGCN_OUTPUT_DIR', 'runs')
