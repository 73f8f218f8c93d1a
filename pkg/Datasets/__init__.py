from Datasets.config import GaussianWorldConfig, NuisanceRange, ShapeWorldConfig
from Datasets.dataset import LabeledDataset, snap_to_pixel_grid
from Datasets.mixing import mix_datasets
from Datasets.storage import load_dataset, save_dataset
from Datasets.transforms import bilinear_resize, box_downsample, resize_center_crop
from Datasets.worlds import make_gaussian_world, make_reference_split, make_shape_world
