export {
  autocorrelationChannel,
  buildCorpus,
  buildInput,
  channelsFor,
  diskMask,
  generateTrainingPairs,
  imageIntensity,
  InputMode,
  normalizeMax,
  prepareImage,
  pupilIntensity,
  sampleRaw,
  TrainConfig,
  TrainConfigSchema,
  TrainingPairs,
} from './data.js';
export { Dataset, DatasetRecord, loadDataset, readF32 } from './dataset.js';
export { fft2Centered, fftshift2, ifft2Centered, roll2 } from './fft.js';
export {
  Adam,
  CheckpointJson,
  Conv3x3,
  CONV_CHANNELS,
  Dense,
  FC_WIDTHS,
  KFinderModel,
  MaxPool2,
  mm,
  mmABt,
  mmAtB,
  Param,
} from './model.js';
export {
  PredictionFile,
  predictDataset,
  PredictOptions,
  rmseAgainstTruth,
  writePredictions,
} from './predict.js';
export { Rng } from './rng.js';
export { makeTexture, resizeSquare } from './texture.js';
export { constantPredictorRmse, evaluateRmse, train, TrainOptions, TrainResult } from './train.js';
