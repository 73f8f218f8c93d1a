from Classification.checkpoint import load_classifier, save_classifier
from Classification.experiments import ExperimentRow, SummaryRow, augmentation_experiment, summarize_rows
from Classification.models import ClassifierModel, MLPClassifier, ResidualConvNet, build_classifier
from Classification.protocol import CASRecord, cas, check_no_overlap, train_cas_classifier
from Classification.recipes import AUGMENT_RECIPE, CAS_RECIPE, FULL_SCALE_CAS_RECIPE, Preprocessing, TrainRecipe, learning_rate
from Classification.training import evaluate, train_classifier
