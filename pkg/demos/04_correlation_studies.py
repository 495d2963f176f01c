"""
Do embedding distances predict downstream value?
================================================

Two studies over the bundled published result tables:

1. Fine-tuning: the FID/CMMD distance of each augmented subset to real rain
   data against the mIoU its fine-tuned segmentation model reached on that
   data. Strong negative correlation means the metric can *select* training
   data before any GPU time is spent.
2. Classifier fooling: the contrastive CMMD toward each trigger against how
   many of the subset's images a weather classifier assigned to it.
"""

from wxforge.analysis import bundled_results_table, correlate_study

table = bundled_results_table()

print("metric distance vs fine-tuned mIoU on real rain (35 subsets):")
for x in ("fid.acdc_rain", "cmmd.acdc_rain"):
    s = correlate_study(table, x, "retrain_miou")
    print(f"  {x:>15}: r = {s.result.r:+.3f}  (p = {s.result.p:.2e})")

print("\ncontrastive CMMD vs classifier prediction counts:")
for trigger in ("fog", "rain", "sun"):
    s = correlate_study(table, f"c_cmmd.{trigger}", f"counts.{trigger}")
    print(f"  {trigger:>5}: r = {s.result.r:+.3f}  (p = {s.result.p:.2e})")

print("\nNegative r in the first study: closer embeddings, better transfer.")
print("Positive r in the second: contrastive proximity predicts fooling.")
